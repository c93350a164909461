import numpy as np
import pytest

from rasesim.synth import NoiseModel, SequenceConfig


@pytest.fixture
def noise():
    return NoiseModel()


def fock_tmsv_cov(r: float, cutoff: int = 80) -> np.ndarray:
    """Covariance of a two-mode squeezed vacuum computed in a truncated Fock basis.

    Independent of the symplectic code path: the state is
    sqrt(1 - lam^2) sum_n lam^n |n, n> with lam = -tanh r, and the quadratures
    are x = a + a^dagger, p = -i (a - a^dagger) (vacuum variance 1).
    """
    lam = -np.tanh(r)
    n = np.arange(cutoff)
    psi = np.zeros((cutoff, cutoff))
    psi[n, n] = np.sqrt(1 - lam**2) * lam**n
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    ops = [a + a.T, -1j * (a - a.T)]

    def expect(op_a, op_b):
        # (A (x) B) psi  ->  A psi B^T  in the coefficient-matrix picture
        return np.vdot(psi, op_a @ psi @ op_b.T)

    eye = np.eye(cutoff)
    quads = [(ops[0], eye), (ops[1], eye), (eye, ops[0]), (eye, ops[1])]
    cov = np.zeros((4, 4))
    for i, (ai, bi) in enumerate(quads):
        for j, (aj, bj) in enumerate(quads):
            sym = 0.5 * (expect(ai @ aj, bi @ bj) + expect(aj @ ai, bj @ bi))
            cov[i, j] = sym.real
    return cov


def small_cfg(**kw) -> SequenceConfig:
    base = dict(n_shots=200, rng_seed=7)
    base.update(kw)
    return SequenceConfig(**base)


# one line per acceptance criterion, appended by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
