import numpy as np
import pytest

from bellsim.model import (MODEL1, MODEL3, HvModel, InstrumentDistribution, ResponseFunction,
                           SupportSpec, gallery_model, gallery_names)

N_BIG = 10**6


def make_model(source, A, B, px=None, py=None, pxy=None, name="test"):
    """Model from raw arrays; A (2, n1, nx), B (2, n2, ny)."""
    source = np.asarray(source, dtype=float)
    A = np.asarray(A)
    B = np.asarray(B)
    support = SupportSpec(source.shape[0], source.shape[1], A.shape[2], B.shape[2])
    if pxy is not None:
        inst = InstrumentDistribution(MODEL3, pxy=pxy)
    else:
        nx, ny = A.shape[2], B.shape[2]
        px = np.full((2, nx), 1 / nx) if px is None else px
        py = np.full((2, ny), 1 / ny) if py is None else py
        inst = InstrumentDistribution(MODEL1, px=px, py=py)
    return HvModel(name, support, source, inst, ResponseFunction(A, B))


def constant_model(a=1, b=1):
    return make_model([[1.0]], np.full((2, 1, 1), a), np.full((2, 1, 1), b), name="constant")


def random_model1(rs, max_size=3, zeros=True):
    n1, n2, nx, ny = rs.integers(1, max_size + 1, 4)
    source = rs.dirichlet(np.ones(n1 * n2)).reshape(n1, n2)
    vals = [-1, 0, 1] if zeros else [-1, 1]
    A = rs.choice(vals, (2, n1, nx))
    B = rs.choice(vals, (2, n2, ny))
    px = rs.dirichlet(np.ones(nx), 2)
    py = rs.dirichlet(np.ones(ny), 2)
    return make_model(source, A, B, px=px, py=py, name="random1")


def random_model3(rs, max_size=3):
    n1, n2, nx, ny = rs.integers(1, max_size + 1, 4)
    source = rs.dirichlet(np.ones(n1 * n2)).reshape(n1, n2)
    A = rs.choice([-1, 1], (2, n1, nx))
    B = rs.choice([-1, 1], (2, n2, ny))
    pxy = rs.dirichlet(np.ones(nx * ny), (2, 2)).reshape(2, 2, nx, ny)
    return make_model(source, A, B, pxy=pxy, name="random3")


@pytest.fixture(scope="session")
def gallery():
    return {name: gallery_model(name) for name in gallery_names()}


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) == "call" and "test_acceptance.py" in rep.nodeid:
                detail = dict(rep.user_properties).get("detail", "")
                lines.append((rep.nodeid.split("::")[-1], outcome.upper()[:4], detail))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, mark, detail in sorted(lines):
            terminalreporter.write_line(f"[{mark}] {name}: {detail}")
