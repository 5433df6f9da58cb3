"""Linear and nonlinear positive maps and their normalized PTP channels.

A linear map on N x N operators is stored by its action on the matrix
basis e_ij = |i><j|. The Choi operator C = sum_ij phi(e_ij) (x) e_ij is
Hermitian for Hermitian maps, so it eigendecomposes into a signed
operator-sum form

    phi(X) = sum_a lambda_a A_a X A_a†,   tr(A_a† A_b) = delta_ab,

whose spectrum decides complete positivity (all lambda_a >= 0 iff CP).
Normalizing any positive map by its output trace, X -> phi(X)/tr[phi(X)],
yields a positive trace-preserving channel; the four channel classes are
keyed by whether phi is linear and whether tr[phi(X)] is identically 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

import numpy as np

from .linalg import dag, matrix_exponential

__all__ = [
    "LinearMapAction",
    "OperatorSumRep",
    "NormalizedChannel",
    "PositivityReport",
    "ChannelClass",
    "choi_of",
    "operator_sum_from_choi",
    "positivity_report",
    "apply_normalized",
    "classify",
    "builtin_map",
    "BUILTIN_MAP_NAMES",
]

_HERM_SYMMETRY_TOL = 1e-12
_CHOI_RANK_CUTOFF = 1e-12


def _basis_matrix(dim, i, j):
    e = np.zeros((dim, dim), dtype=complex)
    e[i, j] = 1.0
    return e


@dataclass(frozen=True)
class LinearMapAction:
    """A linear map phi stored as images[i, j] = phi(e_ij).

    Hermitian maps satisfy phi(e_ij)† = phi(e_ji); the constructor checks
    this symmetry because everything downstream relies on it.
    """

    images: np.ndarray  # shape (N, N, N, N), complex

    def __post_init__(self):
        im = np.asarray(self.images, dtype=complex)
        if im.ndim != 4 or len({im.shape[0], im.shape[1], im.shape[2], im.shape[3]}) != 1:
            raise ValueError(f"images must have shape (N, N, N, N), got {im.shape}")
        object.__setattr__(self, "images", im)
        sym_err = np.max(np.abs(dag(im) - im.transpose(1, 0, 2, 3)))
        if sym_err > _HERM_SYMMETRY_TOL:
            raise ValueError(f"map is not Hermitian: symmetry defect {sym_err:.3g}")

    @property
    def dim(self):
        return self.images.shape[0]

    def apply(self, x):
        """phi(x) = sum_ij x_ij phi(e_ij)."""
        x = np.asarray(x, dtype=complex)
        return np.einsum("ij,ijab->ab", x, self.images)

    @classmethod
    def from_function(cls, f, dim):
        """Tabulate a linear map from a callable acting on matrices."""
        images = np.empty((dim, dim, dim, dim), dtype=complex)
        for i in range(dim):
            for j in range(dim):
                images[i, j] = f(_basis_matrix(dim, i, j))
        return cls(images)

    @classmethod
    def identity(cls, dim):
        return cls.from_function(lambda x: x, dim)

    @classmethod
    def transpose(cls, dim):
        return cls.from_function(lambda x: x.T.copy(), dim)


@dataclass(frozen=True)
class OperatorSumRep:
    """Signed operator-sum form {(lambda_a, A_a)} of a Hermitian linear map.

    The A_a are trace-orthonormal and every retained weight satisfies
    |lambda_a| > 1e-12 (the Choi-rank cutoff).
    """

    weights: np.ndarray  # (m,) real
    ops: np.ndarray  # (m, N, N) complex

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        a = np.asarray(self.ops, dtype=complex)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"ops must have shape (m, N, N), got {a.shape}")
        if w.shape[0] != a.shape[0]:
            raise ValueError("weights and ops length mismatch")
        if np.any(np.abs(w) <= _CHOI_RANK_CUTOFF):
            raise ValueError("operator-sum terms must have |lambda| > 1e-12")
        gram = np.einsum("aij,bij->ab", np.conj(a), a)
        if np.max(np.abs(gram - np.eye(a.shape[0]))) > 1e-10:
            raise ValueError("operator-sum ops are not trace-orthonormal")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "ops", a)

    @property
    def dim(self):
        return self.ops.shape[1]

    @property
    def count(self):
        return self.ops.shape[0]

    @property
    def signs(self):
        return np.sign(self.weights)

    def apply(self, x):
        """phi(x) = sum_a lambda_a A_a x A_a†."""
        x = np.asarray(x, dtype=complex)
        return np.einsum("a,aij,jk,alk->il", self.weights, self.ops, x, np.conj(self.ops))

    def trace_operator(self):
        """F = sum_a lambda_a A_a† A_a, so that tr[phi(X)] = tr(F X)."""
        return np.einsum("a,aji,ajk->ik", self.weights, np.conj(self.ops), self.ops)

    def to_action(self):
        return LinearMapAction.from_function(self.apply, self.dim)


def choi_of(action: LinearMapAction):
    """Choi operator C = sum_ij phi(e_ij) (x) e_ij as an N^2 x N^2 matrix."""
    n = action.dim
    c = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            c += np.kron(action.images[i, j], _basis_matrix(n, i, j))
    herm_err = np.max(np.abs(c - dag(c)))
    if herm_err > 1e-10:
        raise ValueError(f"Choi operator not Hermitian: defect {herm_err:.3g}")
    return c


def _fix_phase(a):
    # Make the largest-magnitude entry real positive for reproducible output.
    flat = np.abs(a).ravel()
    k = int(flat.argmax())
    pivot = a.ravel()[k]
    if abs(pivot) == 0.0:
        return a
    return a * (np.conj(pivot) / abs(pivot))


def operator_sum_from_choi(choi):
    """Spectral decomposition of a Hermitian Choi operator into signed Kraus form.

    Eigenvalues with |lambda| <= 1e-12 are dropped; each A_a is the matrix
    reshape of the corresponding eigenvector, <i|A_a|j> = <i,j|V_a>, with its
    global phase fixed so the largest entry is real positive.
    """
    choi = np.asarray(choi, dtype=complex)
    nsq = choi.shape[0]
    n = int(round(np.sqrt(nsq)))
    if choi.shape != (nsq, nsq) or n * n != nsq:
        raise ValueError(f"Choi matrix must be N^2 x N^2, got {choi.shape}")
    if np.max(np.abs(choi - dag(choi))) > 1e-10:
        raise ValueError("Choi matrix must be Hermitian")
    evals, evecs = np.linalg.eigh(choi)
    keep = np.abs(evals) > _CHOI_RANK_CUTOFF
    weights = evals[keep]
    ops = np.stack(
        [_fix_phase(evecs[:, k].reshape(n, n)) for k in np.flatnonzero(keep)]
    ) if keep.any() else np.zeros((0, n, n), dtype=complex)
    if not keep.any():
        raise ValueError("map is numerically zero: no Choi eigenvalue above cutoff")
    order = np.argsort(-weights)
    return OperatorSumRep(weights[order], ops[order])


@dataclass(frozen=True)
class PositivityReport:
    is_cp: bool
    negative_part_norm: float
    p_violations: int
    samples_checked: int


def positivity_report(rep: OperatorSumRep, samples, eig_tol=1e-8, cp_tol=1e-10):
    """Check CP exactly from the Choi spectrum and positivity on sampled states.

    Positivity of a general map is only certified on the provided samples;
    a sample counts as a violation when phi(X) has an eigenvalue < -eig_tol.
    negative_part_norm is the total weight of the negative Choi spectrum.
    """
    neg = rep.weights[rep.weights < 0.0]
    violations = 0
    for x in samples:
        out = rep.apply(x)
        out = (out + dag(out)) / 2.0
        if np.linalg.eigvalsh(out).min() < -eig_tol:
            violations += 1
    return PositivityReport(
        is_cp=bool(np.all(rep.weights >= -cp_tol)),
        negative_part_norm=float(-neg.sum()),
        p_violations=violations,
        samples_checked=len(list(samples)),
    )


class ChannelClass(IntEnum):
    """The four normalized-channel classes, keyed by (linear?, trace-preserving?).

    NINO = "nonlinear in normalization only": phi itself is linear and the
    only nonlinearity is the normalizing denominator tr[phi(X)].
    """

    LINEAR_TP = 1
    NINO = 2
    STATE_DEPENDENT_TP = 3
    GENERAL_NONLINEAR = 4


@dataclass
class NormalizedChannel:
    """A positive map phi together with the normalized channel phi/tr[phi]."""

    name: str
    raw: Callable[[np.ndarray], np.ndarray]
    is_linear: bool
    rep: Optional[OperatorSumRep] = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_rep(cls, rep: OperatorSumRep, name="operator-sum"):
        return cls(name=name, raw=rep.apply, is_linear=True, rep=rep)


def apply_normalized(channel: NormalizedChannel, x):
    """Lambda(x) = phi(x)/tr[phi(x)]; raises when the trace is not positive."""
    y = channel.raw(np.asarray(x, dtype=complex))
    t = np.trace(y).real
    if t <= 1e-12:
        raise ValueError(f"not normalizable on this input: tr[phi(X)] = {t:.3g}")
    return y / t


def classify(channel: NormalizedChannel, samples, trace_tol=1e-10):
    """Channel class from structural linearity and sampled trace preservation."""
    samples = list(samples)
    if not samples:
        raise ValueError("classification needs at least one sample state")
    trace_preserving = True
    for x in samples:
        t = np.trace(channel.raw(np.asarray(x, dtype=complex)))
        if abs(t - 1.0) > trace_tol:
            trace_preserving = False
            break
    if channel.is_linear:
        return ChannelClass.LINEAR_TP if trace_preserving else ChannelClass.NINO
    return ChannelClass.STATE_DEPENDENT_TP if trace_preserving else ChannelClass.GENERAL_NONLINEAR


def _require_hermitian(m, label):
    m = np.asarray(m, dtype=complex)
    if np.max(np.abs(m - dag(m))) > 1e-12:
        raise ValueError(f"{label} must be Hermitian")
    return m


def builtin_map(name, **params):
    """Construct one of the named nonlinear positive maps.

    affine_square(a, b, c):   X -> (a† + c X b†)(a + b X c†)
    phi_plus / phi_minus:     X -> (tr(X) I ± X)^2
    det_thermal:              X -> |det(X)| I
    mean_field_unitary(a, b): X -> U X U†, U = exp(i tr(aX) b), a and b Hermitian
    """
    if name == "affine_square":
        a = np.asarray(params["a"], dtype=complex)
        b = np.asarray(params["b"], dtype=complex)
        c = np.asarray(params["c"], dtype=complex)
        if not (a.shape == b.shape == c.shape) or a.shape[0] != a.shape[1]:
            raise ValueError("affine_square needs three square matrices of equal dim")

        def raw(x):
            w = a + b @ x @ dag(c)
            return dag(w) @ w

        return NormalizedChannel(name, raw, is_linear=False, params=params)

    if name in ("phi_plus", "phi_minus"):
        sign = 1.0 if name == "phi_plus" else -1.0

        def raw(x):
            w = np.trace(x) * np.eye(x.shape[0], dtype=complex) + sign * x
            return w @ w

        return NormalizedChannel(name, raw, is_linear=False, params=params)

    if name == "det_thermal":

        def raw(x):
            return abs(np.linalg.det(x)) * np.eye(x.shape[0], dtype=complex)

        return NormalizedChannel(name, raw, is_linear=False, params=params)

    if name == "mean_field_unitary":
        a = _require_hermitian(params["a"], "a")
        b = _require_hermitian(params["b"], "b")
        if a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise ValueError("mean_field_unitary needs square Hermitian a, b of equal dim")

        def raw(x):
            u = matrix_exponential(1j * np.trace(a @ x).real * b)
            return u @ x @ dag(u)

        return NormalizedChannel(name, raw, is_linear=False, params=params)

    raise ValueError(f"unknown builtin map {name!r}; choose from {sorted(BUILTIN_MAP_NAMES)}")


BUILTIN_MAP_NAMES = frozenset(
    {"affine_square", "phi_plus", "phi_minus", "det_thermal", "mean_field_unitary"}
)
