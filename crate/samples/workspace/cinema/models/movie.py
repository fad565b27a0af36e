class Movie:
    def __init__(self, title, genre, daily_rate, copies=1):
        if daily_rate < 0:
            raise ValueError("daily rate must be non-negative")
        self.title = title
        self.genre = genre
        self.daily_rate = daily_rate
        self.copies = copies
        self.rented = 0

    def available(self):
        return self.copies - self.rented

    def is_available(self):
        return self.available() > 0

    def checkout(self):
        if not self.is_available():
            raise RuntimeError(f"no copies of {self.title} left")
        self.rented += 1

    def checkin(self):
        if self.rented == 0:
            raise RuntimeError(f"{self.title} was not rented")
        self.rented -= 1
