"""Quantum states, channels as Choi matrices, and the relative entropy.

Choi matrices follow the unnormalized convention ``Tr_B Gamma = I_A``
(so ``Tr Gamma = dim_a``), under which ``sandwich(rho, Gamma)`` has unit
trace for every density matrix ``rho`` and trace-preserving channel.

Relative entropies are natural-log (nats) throughout; divide by ``ln 2``
for bits.  ``+inf`` is returned as the IEEE infinity, never a large float.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    eigh,
    hermitize,
    kron,
    matrix_sqrt,
    partial_trace,
    trace,
)

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "BELL_STATES",
    "ChoiMatrix",
    "choi_from_kraus",
    "dephasing_choi",
    "depolarizing_choi",
    "maximally_entangled",
    "random_density",
    "relative_entropy",
    "require_density",
    "sandwich",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_B00 = np.array([1, 0, 0, 0], dtype=complex)
_B01 = np.array([0, 1, 0, 0], dtype=complex)
_B10 = np.array([0, 0, 1, 0], dtype=complex)
_B11 = np.array([0, 0, 0, 1], dtype=complex)

#: Phi+, Phi-, Psi+, Psi- as kets.
BELL_STATES = (
    (_B00 + _B11) / np.sqrt(2),
    (_B00 - _B11) / np.sqrt(2),
    (_B01 + _B10) / np.sqrt(2),
    (_B01 - _B10) / np.sqrt(2),
)


def _projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, np.conj(ket))


def require_density(rho: np.ndarray, psd_tol: float = 1e-10, trace_tol: float = 1e-10) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD and unit trace to tolerance)."""
    rho = np.asarray(rho, dtype=complex)
    if not np.all(np.abs(rho - np.conj(rho.T)) <= 1e-10):
        raise ValueError("density matrix is not Hermitian")
    w = np.linalg.eigvalsh(hermitize(rho))
    if w.min() < -psd_tol:
        raise ValueError(f"density matrix has negative eigenvalue {w.min():.3e}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    return rho


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix of a channel A -> B, with ``Tr_B mat = I_A``.

    ``check_tp=False`` admits non-trace-preserving maps (the PSD check
    always runs).
    """

    mat: np.ndarray
    dim_a: int
    dim_b: int
    check_tp: bool = field(default=True, compare=False)

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.dim_a * self.dim_b,) * 2:
            raise ValueError(
                f"Choi matrix shape {mat.shape} does not match dims "
                f"({self.dim_a}, {self.dim_b})"
            )
        mat = hermitize(mat)
        w = np.linalg.eigvalsh(mat)
        if w.min() < -1e-10:
            raise ValueError(f"Choi matrix has negative eigenvalue {w.min():.3e}")
        if self.check_tp:
            marg = partial_trace(mat, self.dim_a, self.dim_b, keep="A")
            if np.max(np.abs(marg - np.eye(self.dim_a))) > 1e-8:
                raise ValueError("channel is not trace-preserving: Tr_B Gamma != I_A")
        object.__setattr__(self, "mat", mat)


def depolarizing_choi(p: float) -> ChoiMatrix:
    """Choi matrix of rho -> (1-p) rho + p I/2.

    Bell-basis weights are (1 - 3p/4, p/4, p/4, p/4).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing parameter must be in [0, 1], got {p}")
    weights = (1 - 0.75 * p, 0.25 * p, 0.25 * p, 0.25 * p)
    mat = 2 * sum(w * _projector(k) for w, k in zip(weights, BELL_STATES))
    return ChoiMatrix(mat=mat, dim_a=2, dim_b=2)


def dephasing_choi(p_deph: float) -> ChoiMatrix:
    """Choi matrix of rho -> p rho + (1-p) Z rho Z (Bell weights (p, 1-p, 0, 0))."""
    if not 0.0 <= p_deph <= 1.0:
        raise ValueError(f"dephasing parameter must be in [0, 1], got {p_deph}")
    mat = 2 * (p_deph * _projector(BELL_STATES[0]) + (1 - p_deph) * _projector(BELL_STATES[1]))
    return ChoiMatrix(mat=mat, dim_a=2, dim_b=2)


def choi_from_kraus(kraus, check: bool = True, atol: float = 1e-8) -> ChoiMatrix:
    """Choi matrix from Kraus operators (each of shape dim_b x dim_a)."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ValueError("at least one Kraus operator is required")
    dim_b, dim_a = ops[0].shape
    comp = sum(np.conj(k.T) @ k for k in ops)
    complete = np.max(np.abs(comp - np.eye(dim_a))) <= atol
    if check and not complete:
        raise ValueError("Kraus operators do not satisfy sum K^dag K = I_A")
    me = maximally_entangled(dim_a)
    mat = dim_a * sum(
        kron(np.eye(dim_a), k) @ me @ np.conj(kron(np.eye(dim_a), k).T) for k in ops
    )
    return ChoiMatrix(mat=mat, dim_a=dim_a, dim_b=dim_b, check_tp=check)


def maximally_entangled(d: int) -> np.ndarray:
    """Density matrix of the maximally entangled ket d^(-1/2) sum_i |ii>."""
    if d < 2:
        raise ValueError("d must be >= 2")
    ket = np.zeros(d * d, dtype=complex)
    ket[:: d + 1] = 1 / np.sqrt(d)
    return _projector(ket)


def sandwich(rho_a: np.ndarray, gamma: ChoiMatrix) -> np.ndarray:
    """(sqrt(rho_A) x I_B) Gamma (sqrt(rho_A) x I_B); unit trace for TP channels.

    ``rho_a`` may be a stack of states with shape (..., dim_a, dim_a).
    """
    rho_a = np.asarray(rho_a, dtype=complex)
    if rho_a.shape[-1] != gamma.dim_a:
        raise ValueError(
            f"state dimension {rho_a.shape[-1]} does not match Choi dim_a {gamma.dim_a}"
        )
    sq = kron(matrix_sqrt(rho_a), np.eye(gamma.dim_b))
    return hermitize(sq @ gamma.mat @ sq)


def random_density(dim: int, seed) -> np.ndarray:
    """Full-rank random density matrix G G^dag / Tr, mixed with 1e-6 I/dim.

    ``seed`` may be an int, a sequence of ints, or a Generator.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ np.conj(g.T)
    rho = rho / np.trace(rho).real
    rho = (rho + 1e-6 * np.eye(dim) / dim) / (1 + 1e-6)
    return hermitize(rho)


def relative_entropy(
    rho: np.ndarray,
    sigma: np.ndarray,
    support_cutoff: float = 1e-12,
    psd_tol: float = 1e-10,
    outside_mass_tol: float = 1e-10,
):
    """Umegaki relative entropy Tr rho (log rho - log sigma) in nats.

    Inputs must be PSD to ``psd_tol`` but need not have unit trace.  When
    the eigenvalue mass of ``rho`` outside the support of ``sigma`` exceeds
    ``outside_mass_tol`` the result is ``+inf``.  Accepts stacks on either
    argument (broadcasting) and then returns an array.
    """
    rho = hermitize(rho)
    sigma = hermitize(sigma)
    wr = np.linalg.eigvalsh(rho)
    spec_s = eigh(sigma)
    ws, u = spec_s.eigenvalues, spec_s.eigenvectors
    if np.min(wr) < -psd_tol:
        raise ValueError(f"rho has negative eigenvalue {float(np.min(wr)):.3e}")
    if np.min(ws) < -psd_tol:
        raise ValueError(f"sigma has negative eigenvalue {float(np.min(ws)):.3e}")

    cut_r = support_cutoff * np.maximum(wr[..., -1:], 0.0)
    tr_rlogr = np.sum(
        np.where(wr > cut_r, wr * np.log(np.where(wr > cut_r, wr, 1.0)), 0.0), axis=-1
    )

    cut_s = support_cutoff * np.maximum(ws[..., -1:], 0.0)
    # <u_k| rho |u_k> for each eigenvector of sigma, batched.
    udag = np.conj(np.swapaxes(u, -1, -2))
    diag = np.einsum("...ki,...ij,...jk->...k", udag, rho, u).real
    inside = ws > cut_s
    outside_mass = np.sum(np.where(inside, 0.0, diag), axis=-1)
    tr_rlogs = np.sum(
        np.where(inside, diag * np.log(np.where(inside, ws, 1.0)), 0.0), axis=-1
    )

    out = np.where(outside_mass > outside_mass_tol, np.inf, tr_rlogr - tr_rlogs)
    return float(out) if np.ndim(out) == 0 else out
