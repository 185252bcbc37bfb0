import numpy as np
import pytest


def random_psi(rng, N, scale=1.0):
    """Symmetric nonnegative coupling matrix with a zero diagonal."""
    P = rng.random((N, N)) * scale
    P = P + P.T
    np.fill_diagonal(P, 0.0)
    return P


def brute_force_sinrs(h, v, association, noise):
    """Materialize every stream's contribution to every user, one at a time."""
    N, K, M = h.shape
    out = np.zeros(K)
    for u in range(K):
        signal = 0.0
        interference = 0.0
        for s in range(K):
            i = association[s]
            amp = sum(np.conj(h[i, u, m]) * v[s, m] for m in range(M))
            power = abs(amp) ** 2
            if s == u:
                signal = power
            else:
                interference += power
        out[u] = signal / (interference + noise)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
