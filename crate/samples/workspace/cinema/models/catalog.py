from movie import Movie


class Catalog:
    def __init__(self):
        self.movies = {}

    def add_movie(self, title, genre, daily_rate, copies=1):
        movie = Movie(title, genre, daily_rate, copies)
        self.movies[title] = movie
        return movie

    def find(self, title):
        return self.movies.get(title)

    def by_genre(self, genre):
        return sorted(m.title for m in self.movies.values() if m.genre == genre)

    def available_titles(self):
        return sorted(t for t, m in self.movies.items() if m.is_available())
