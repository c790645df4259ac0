import pytest

from wcett.dag import ProgramDag, merge_series
from wcett.generate import diamond_chain, layered_dag


@pytest.fixture
def chain3():
    return diamond_chain(3)


@pytest.fixture
def chain3_merged():
    return merge_series(diamond_chain(3))[0]


@pytest.fixture
def two_paths():
    # 0 -a-> 1 -> 3 and 0 -b-> 2 -> 3
    return ProgramDag.build([0, 1, 2, 3], [(0, 0, 1), (1, 0, 2), (2, 1, 3), (3, 2, 3)], 0, 3)


@pytest.fixture
def single_path():
    return ProgramDag.build([0, 1, 2], [(0, 0, 1), (1, 1, 2)], 0, 2)


SMALL_LAYERED = [(4, 3, 0.5, s) for s in range(4)] + [(5, 3, 0.4, s) for s in range(4)]


@pytest.fixture(params=SMALL_LAYERED, ids=lambda p: "L{}W{}s{}".format(p[0], p[1], p[3]))
def small_layered(request):
    return layered_dag(*request.param)


ACCEPTANCE_CRITERIA = 10


def pytest_terminal_summary(terminalreporter):
    from trials import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_CRITERIA + 1):
        if n in RESULTS:
            ok, detail = RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  not run or did not complete")
