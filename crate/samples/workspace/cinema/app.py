from models.catalog import Catalog


def main():
    catalog = Catalog()
    catalog.add_movie("Alien", "sci-fi", 2.5, copies=2)
    print(catalog.available_titles())


if __name__ == "__main__":
    main()
