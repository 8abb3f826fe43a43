"""Dense symmetric linear algebra primitives.

Symmetric matrices are plain ``(p, p)`` float arrays whose entries are
*exactly* symmetric (``X[i, j] == X[j, i]`` bitwise).  :func:`symmetrize`
produces such arrays; every routine here both consumes and returns them.
Factors are plain ``(p, r)`` arrays ``U`` representing ``X = U @ U.T``.

All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRankError, NumericalError

# Eigenvalues above -PSD_CLAMP_REL * ||X||_2 are treated as nonnegative;
# absorbs eigensolver round-off.
PSD_CLAMP_REL = 1e-8

_SIGN_TOL = 1e-12


def symmetrize(x: np.ndarray) -> np.ndarray:
    """Return ``(x + x.T) / 2`` with exact elementwise symmetry."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return 0.5 * (x + x.T)


def check_symmetric(x: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that ``x`` is a square, exactly symmetric float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"{name} must be square, got shape {x.shape}")
    if not np.array_equal(x, x.T):
        raise ValueError(f"{name} is not exactly symmetric; use symmetrize() first")
    return x


def gram(u: np.ndarray) -> np.ndarray:
    """``U @ U.T`` re-symmetrized so the result is exactly symmetric."""
    u = np.asarray(u, dtype=float)
    return symmetrize(u @ u.T)


@dataclass(frozen=True)
class Alignment:
    """Optimal orthogonal alignment of one factor onto another.

    ``rotation`` is the r x r orthogonal matrix R minimizing ``||U - V R||_F``
    over the full orthogonal group (rotations and reflections);
    ``distance_sq`` is the attained squared distance.
    """

    rotation: np.ndarray
    distance_sq: float


def _eigh_sym(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, q = np.linalg.eigh(x)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"symmetric eigendecomposition failed for shape {x.shape}: {exc}"
        ) from exc
    return w, q


def _fix_eigvec_signs(q: np.ndarray) -> np.ndarray:
    # Deterministic sign convention: first entry with |.| > tol made positive.
    q = q.copy()
    for j in range(q.shape[1]):
        col = q[:, j]
        nz = np.nonzero(np.abs(col) > _SIGN_TOL)[0]
        if nz.size and col[nz[0]] < 0:
            q[:, j] = -col
    return q


def procrustes(u: np.ndarray, v: np.ndarray) -> Alignment:
    """Solve ``min_R ||U - V R||_F^2`` over orthogonal r x r matrices R.

    Uses the SVD ``V.T @ U = P diag(s) Q.T``; the minimizer is ``R = P @ Q.T``
    and the minimum equals ``||U||_F^2 + ||V||_F^2 - 2 sum(s)``.  When
    ``V.T @ U`` is rank deficient the minimizer is not unique but the
    distance value is.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError(f"factor shapes must match, got {u.shape} and {v.shape}")
    try:
        p, s, qt = np.linalg.svd(v.T @ u)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed in procrustes: {exc}") from exc
    rotation = p @ qt
    dist_sq = float(np.sum(u * u) + np.sum(v * v) - 2.0 * np.sum(s))
    return Alignment(rotation=rotation, distance_sq=max(dist_sq, 0.0))


def factor_distance_sq(u: np.ndarray, v: np.ndarray) -> float:
    """The orthogonally invariant metric ``min_R ||U - V R||_F^2``.

    Note the minimization applies R to the second argument only; the value
    is not symmetric in (U, V) when the factors have different spectra.
    """
    return procrustes(u, v).distance_sq


def psd_project(x: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix to symmetric ``x``.

    Clamps negative eigenvalues of a full symmetric eigendecomposition at
    zero and recomposes.
    """
    x = check_symmetric(x, "psd_project input")
    w, q = _eigh_sym(x)
    w_clamped = np.maximum(w, 0.0)
    return symmetrize((q * w_clamped) @ q.T)


def rank_r_factor(x: np.ndarray, r: int) -> np.ndarray:
    """Best rank-``r`` factor of a PSD matrix: ``U = Q_r diag(sqrt(lam_r))``.

    Eigenvalues are sorted descending (stable on ties), clamped at zero, and
    eigenvector signs are fixed so repeated calls are bit-reproducible.
    Requires ``x`` PSD within ``PSD_CLAMP_REL`` of its spectral norm.
    """
    x = check_symmetric(x, "rank_r_factor input")
    p = x.shape[0]
    if not 1 <= r <= p:
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= {p}")
    w, q = _eigh_sym(x)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if np.min(w) < -PSD_CLAMP_REL * scale:
        raise NumericalError(
            f"matrix is materially indefinite: min eigenvalue {np.min(w):.3e} "
            f"vs spectral norm {scale:.3e}"
        )
    order = np.argsort(-w, kind="stable")[:r]
    top = np.maximum(w[order], 0.0)
    vecs = _fix_eigvec_signs(q[:, order])
    return vecs * np.sqrt(top)


def spectral_stats(x: np.ndarray, r: int) -> tuple[float, float, float]:
    """Return ``(sigma_r, sigma_1, tau)`` of a PSD matrix.

    ``sigma_r`` is the r-th largest eigenvalue, ``sigma_1`` the largest and
    ``tau`` their ratio.  Raises :class:`DegenerateRankError` when the matrix
    is numerically rank deficient below ``r``.
    """
    x = check_symmetric(x, "spectral_stats input")
    p = x.shape[0]
    if not 1 <= r <= p:
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= {p}")
    w = np.sort(np.linalg.eigvalsh(x))[::-1]
    sigma_1 = float(w[0])
    sigma_r = float(w[r - 1])
    if sigma_r <= 1e-12 * sigma_1 or sigma_r <= 0.0:
        raise DegenerateRankError(
            f"sigma_{r}={sigma_r:.3e} is degenerate relative to sigma_1={sigma_1:.3e}"
        )
    return sigma_r, sigma_1, sigma_1 / sigma_r
