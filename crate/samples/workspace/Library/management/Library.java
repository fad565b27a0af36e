package management;

import java.util.HashMap;
import java.util.Map;
import java.util.Optional;

public class Library {
    private final Map<String, Book> books = new HashMap<>();
    private final Map<String, Member> members = new HashMap<>();

    public void addBook(Book book) {
        books.put(book.getIsbn(), book);
    }

    public void registerMember(Member member) {
        members.put(member.getId(), member);
    }

    public Optional<Book> findBook(String isbn) {
        return Optional.ofNullable(books.get(isbn));
    }

    public void lend(String isbn, String memberId) {
        Book book = findBook(isbn).orElseThrow(() -> new IllegalArgumentException("unknown book " + isbn));
        Member member = requireMember(memberId);
        member.addLoan(book);
        book.markBorrowed();
    }

    public void giveBack(String isbn, String memberId) {
        Book book = findBook(isbn).orElseThrow(() -> new IllegalArgumentException("unknown book " + isbn));
        Member member = requireMember(memberId);
        book.markReturned();
        member.removeLoan(book);
    }

    public long availableCount() {
        return books.values().stream().filter(b -> !b.isBorrowed()).count();
    }

    private Member requireMember(String memberId) {
        Member member = members.get(memberId);
        if (member == null) {
            throw new IllegalArgumentException("unknown member " + memberId);
        }
        return member;
    }
}
