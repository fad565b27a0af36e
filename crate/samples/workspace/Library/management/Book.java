package management;

public class Book {
    private final String isbn;
    private final String title;
    private final String author;
    private boolean borrowed;

    public Book(String isbn, String title, String author) {
        if (isbn == null || isbn.isEmpty()) {
            throw new IllegalArgumentException("isbn is required");
        }
        this.isbn = isbn;
        this.title = title;
        this.author = author;
    }

    public String getIsbn() {
        return isbn;
    }

    public String getTitle() {
        return title;
    }

    public String getAuthor() {
        return author;
    }

    public boolean isBorrowed() {
        return borrowed;
    }

    public void markBorrowed() {
        if (borrowed) {
            throw new IllegalStateException(title + " is already borrowed");
        }
        borrowed = true;
    }

    public void markReturned() {
        if (!borrowed) {
            throw new IllegalStateException(title + " is not borrowed");
        }
        borrowed = false;
    }
}
