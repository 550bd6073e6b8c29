import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_word(letters, sites):
    """Dense Pauli word, first site most significant."""
    out = np.ones((1, 1), dtype=complex)
    for s in sites:
        out = np.kron(out, PAULI[letters.get(s, "I")])
    return out


def dense_unitary(u, sites):
    """Independent oracle: X_a diag(exp(2 pi i f(n) / 2^m)), first site most significant."""
    n = len(sites)
    dim = 1 << n
    diag = np.zeros(dim, dtype=complex)
    for idx in range(dim):
        occ = {s: (idx >> (n - 1 - p)) & 1 for p, s in enumerate(sites)}
        f = sum(c * all(occ[s] for s in mono) for mono, c in u.poly.items())
        diag[idx] = np.exp(2j * np.pi * f / u.modulus)
    xmask = sum(1 << (n - 1 - p) for p, s in enumerate(sites) if s in u.x_layer)
    perm = np.zeros((dim, dim))
    perm[np.arange(dim) ^ xmask, np.arange(dim)] = 1
    return perm @ np.diag(diag)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
