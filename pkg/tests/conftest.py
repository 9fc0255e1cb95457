import numpy as np
import pytest

from qabcert import Objective


class ConstantObjective(Objective):
    """omega(rho) = K for a fixed Hermitian K (state independent)."""

    def __init__(self, k):
        self.k = np.asarray(k, dtype=complex)
        self.dim = self.k.shape[-1]

    def omega(self, rho):
        rho = np.asarray(rho)
        return np.broadcast_to(self.k, rho.shape).copy()


class LinearTraceObjective(Objective):
    """omega(rho) = Tr(rho) * K; constant on unit-trace states."""

    def __init__(self, k):
        self.k = np.asarray(k, dtype=complex)
        self.dim = self.k.shape[-1]

    def omega(self, rho):
        tr = np.trace(rho, axis1=-2, axis2=-1).real
        return np.asarray(tr)[..., None, None] * self.k


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, dim):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ np.conj(g.T)
    rho = rho / np.trace(rho).real
    return (rho + 1e-9 * np.eye(dim) / dim) / (1 + 1e-9)
