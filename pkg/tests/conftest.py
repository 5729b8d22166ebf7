import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number, passed, detail=""):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def make_problem(kind, n=8, N=4, seed=0, M=10, **data_kw):
    from saacontrol.composite import CompositeProblem
    from saacontrol.mesh import build_mesh
    from saacontrol.models import ProblemData
    from saacontrol.random_field import default_kl_spec, iid_samples

    spec = default_kl_spec(M=M)
    return CompositeProblem(
        kind, ProblemData.for_kind(kind, **data_kw), spec, iid_samples(spec, N, seed), build_mesh(n)
    )
