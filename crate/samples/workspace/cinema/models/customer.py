class Customer:
    MAX_RENTALS = 3

    def __init__(self, name, email):
        self.name = name
        self.email = email
        self.rentals = []

    def can_rent(self):
        return len(self.active_rentals()) < self.MAX_RENTALS

    def active_rentals(self):
        return [r for r in self.rentals if not r.returned]

    def add_rental(self, rental):
        if not self.can_rent():
            raise RuntimeError(f"{self.name} has too many active rentals")
        self.rentals.append(rental)

    def total_spent(self):
        return sum(r.cost() for r in self.rentals if r.returned)
