package management;

import java.util.ArrayList;
import java.util.Collections;
import java.util.List;

public class Member {
    public static final int MAX_LOANS = 5;

    private final String id;
    private final String name;
    private final List<Book> loans = new ArrayList<>();

    public Member(String id, String name) {
        this.id = id;
        this.name = name;
    }

    public String getId() {
        return id;
    }

    public String getName() {
        return name;
    }

    public boolean canBorrow() {
        return loans.size() < MAX_LOANS;
    }

    public void addLoan(Book book) {
        if (!canBorrow()) {
            throw new IllegalStateException(name + " has reached the loan limit");
        }
        loans.add(book);
    }

    public void removeLoan(Book book) {
        loans.remove(book);
    }

    public List<Book> getLoans() {
        return Collections.unmodifiableList(loans);
    }
}
