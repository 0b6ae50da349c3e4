import math

import numpy as np
import pytest

from blowuplab import DomainSpec, FieldSpec, ProblemSpec, build_grid

H_REF = 0.0125


def reference_problem(M=160.0, p=2.0):
    dom = DomainSpec.interval(1.0)
    return ProblemSpec(dom, FieldSpec.constant(1.0), FieldSpec.cosine(1.0), p, M, 1.0)


def vbump_problem(M=160.0, p=2.0):
    dom = DomainSpec.interval(1.0)
    V = FieldSpec.gaussian(1.0, [1.0], [20.0], [0.3])
    return ProblemSpec(dom, V, FieldSpec.cosine(1.0), p, M, 1.0)


def dense_argmax(f, lo=-1.0, hi=1.0, step=1e-5):
    """Brute-force maximizer of a 1D function on a fine grid."""
    x = np.arange(lo, hi + step / 2, step)
    y = f(x)
    k = int(np.argmax(y))
    return float(x[k]), float(y[k])


def vbump_weight(x):
    return np.cos(math.pi * x / 2) * (1 + np.exp(-20 * (x - 0.3) ** 2))


@pytest.fixture
def ref_grid():
    return build_grid(DomainSpec.interval(1.0), H_REF)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
