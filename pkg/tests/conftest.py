import pytest

from polaronlab.pekar_variational import default_grid, minimize_pekar, soliton_oracle
from polaronlab.tf_variational import minimize_tf

ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def pekar_1024():
    return minimize_pekar(1.0, grid=default_grid(n_nodes=1024))


@pytest.fixture(scope="session")
def pekar_oracle():
    return soliton_oracle()


@pytest.fixture(scope="session")
def tf_results():
    return {U: minimize_tf(U) for U in (0.1, 0.5, 0.9)}


@pytest.fixture
def acceptance(request):
    """``record(criterion, label, ok, detail)`` collects one acceptance check."""
    store = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(criterion, label, ok, detail=""):
        store.setdefault(criterion, []).append((label, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE_KEY, None)
    if not store:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted(store):
        checks = store[criterion]
        ok = all(c[1] for c in checks)
        failed = [f"{label} ({detail})" for label, good, detail in checks if not good]
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " - failing: " + "; ".join(failed)
        tr.write_line(line)
        for label, good, detail in checks:
            tr.write_line(f"    [{'ok' if good else 'FAIL'}] {label}: {detail}")
