import pytest

from lotinduce.expr import parse_program

# Hand-built witness programs. Output is the last factor applied to the empty string.
WITNESSES = {
    "An": "(pair a (if (flip 0.5) ∅ (F1 ∅)))",
    "AbN": "(pair a (pair b (if (flip 0.5) ∅ (F1 ∅))))",
    "AnBn": "(if (flip 0.5) x (pair a (F1 (pair b x)))) ; (pair a (F1 b))",
    "AnB2n": "(if (flip 0.5) x (pair a (F1 (pair (pair b b) x)))) ; (pair a (F1 (pair b b)))",
    "Dyck": "(if (flip 0.9) ∅ (pair a (pair (F1 ∅) (pair b (F1 ∅))))) ; "
            "(pair a (pair (F1 ∅) (pair b (F1 ∅))))",
    "AnBnCn": "(if (flip 0.5) x (pair (pair a (F1 (pair b x))) c)) ; (pair a (pair (F1 b) c))",
}
# exact flip depth used when enumerating each witness
WITNESS_FLIPS = {"An": 20, "AbN": 20, "AnBn": 20, "AnB2n": 20, "Dyck": 12, "AnBnCn": 16}

GEOMETRIC_A = "(pair a (if (flip 0.7) ∅ (F1 ∅)))"


@pytest.fixture
def geometric_a():
    return parse_program(GEOMETRIC_A)


def witness(name):
    return parse_program(WITNESSES[name])


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
