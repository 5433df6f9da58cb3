"""Dense complex linear algebra for small matrices, plus qubit state helpers.

Everything here works on plain complex ndarrays. States are density
matrices (Hermitian, PSD, unit trace); for qubits they map to and from
Bloch vectors r with X = (I + r.sigma)/2 and r_a = tr(X sigma_a).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "PAULIS",
    "IDENTITY_2",
    "dag",
    "hermitian_split",
    "is_hermitian",
    "is_psd",
    "check_density_matrix",
    "to_bloch",
    "from_bloch",
    "matrix_exponential",
    "schatten_norm",
    "random_density",
    "random_bloch_in_ball",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

# Largest generator norm the exponential accepts; accuracy degrades beyond.
_EXPM_MAX_NORM = 50.0
_EXPM_SQUARING_THRESHOLD = 0.5


def dag(a):
    """Conjugate transpose."""
    return np.conj(a.swapaxes(-1, -2))


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def hermitian_split(m):
    """Split a square matrix into Hermitian and anti-Hermitian parts.

    Returns (m_plus, m_minus) with m_plus = (m + m†)/2 Hermitian,
    m_minus = (m - m†)/2 anti-Hermitian, and m_plus + m_minus = m.
    """
    m = _as_square(m)
    md = dag(m)
    return (m + md) / 2.0, (m - md) / 2.0


def is_hermitian(m, tol=1e-12):
    m = _as_square(m)
    return np.max(np.abs(m - dag(m))) <= tol


def is_psd(m, tol=1e-10):
    """True iff the Hermitian matrix m has all eigenvalues >= -tol.

    Raises ValueError on non-Hermitian input (checked against the same tol).
    """
    m = _as_square(m)
    if np.max(np.abs(m - dag(m))) > max(tol, 1e-12):
        raise ValueError("not Hermitian")
    return bool(np.linalg.eigvalsh(m).min() >= -tol)


def check_density_matrix(x, herm_tol=1e-12, psd_tol=1e-10, trace_tol=1e-10):
    """Validate density-matrix invariants, raising ValueError on violation."""
    x = _as_square(x, "state")
    if np.max(np.abs(x - dag(x))) > herm_tol:
        raise ValueError("state is not Hermitian")
    if abs(np.trace(x).real - 1.0) > trace_tol or abs(np.trace(x).imag) > trace_tol:
        raise ValueError("state does not have unit trace")
    if np.linalg.eigvalsh((x + dag(x)) / 2.0).min() < -psd_tol:
        raise ValueError("state is not positive semidefinite")
    return x


def to_bloch(x):
    """Bloch vector of a 2x2 density matrix: r_a = tr(x sigma_a)."""
    x = _as_square(x, "state")
    if x.shape != (2, 2):
        raise ValueError(f"Bloch conversion requires a 2x2 matrix, got {x.shape}")
    return np.array(
        [
            np.trace(x @ SIGMA_X).real,
            np.trace(x @ SIGMA_Y).real,
            np.trace(x @ SIGMA_Z).real,
        ]
    )


def from_bloch(r, tol=1e-9):
    """Density matrix (I + r.sigma)/2 for a Bloch vector inside the ball."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError(f"Bloch vector must have shape (3,), got {r.shape}")
    if r @ r > (1.0 + tol) ** 2:
        raise ValueError(f"outside Bloch ball: |r| = {np.sqrt(r @ r):.6g}")
    return (IDENTITY_2 + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z) / 2.0


def matrix_exponential(m):
    """exp(m) by scaling and squaring with a Taylor series core.

    The argument is scaled so its 1-norm is at most 0.5, where the series
    converges in ~20 terms at machine precision, then squared back up.
    Inputs with 1-norm above 50 are rejected.
    """
    m = _as_square(m)
    norm1 = np.linalg.norm(m, 1)
    if not np.isfinite(norm1):
        raise ValueError("matrix has non-finite entries")
    if norm1 > _EXPM_MAX_NORM:
        raise ValueError(f"matrix norm {norm1:.3g} exceeds supported range {_EXPM_MAX_NORM}")
    s = 0
    if norm1 > _EXPM_SQUARING_THRESHOLD:
        s = int(np.ceil(np.log2(norm1 / _EXPM_SQUARING_THRESHOLD)))
    t = m / (2.0**s)
    n = m.shape[0]
    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 40):
        term = term @ t / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(s):
        result = result @ result
    return result


def schatten_norm(x, p):
    """Schatten p-norm: the p-norm of the singular values (p >= 1 or inf)."""
    x = _as_square(x)
    if not (p == np.inf or p >= 1.0):
        raise ValueError(f"Schatten norm requires p >= 1, got {p}")
    sv = np.linalg.svd(x, compute_uv=False)
    if p == np.inf:
        return float(sv.max()) if sv.size else 0.0
    return float(np.sum(sv**p) ** (1.0 / p))


def random_density(rng, dim=2, rank=None):
    """Random density matrix: G G†/tr(G G†) with Gaussian G of given rank."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    x = g @ dag(g)
    return x / np.trace(x).real


def random_bloch_in_ball(rng):
    """One Bloch vector uniform in the closed unit ball (cube rejection)."""
    while True:
        r = rng.uniform(-1.0, 1.0, size=3)
        if r @ r <= 1.0:
            return r
