class Rental:
    LATE_FEE_PER_DAY = 1.5

    def __init__(self, movie, customer, days):
        if days <= 0:
            raise ValueError("rental must last at least one day")
        self.movie = movie
        self.customer = customer
        self.days = days
        self.days_kept = 0
        self.returned = False

    def start(self):
        self.movie.checkout()
        self.customer.add_rental(self)

    def finish(self, days_kept):
        self.days_kept = days_kept
        self.returned = True
        self.movie.checkin()
        return self.cost()

    def late_days(self):
        return max(0, self.days_kept - self.days)

    def cost(self):
        base = self.movie.daily_rate * self.days
        return base + self.late_days() * self.LATE_FEE_PER_DAY
