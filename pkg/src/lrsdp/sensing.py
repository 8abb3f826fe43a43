"""Finite-sum objectives over PSD matrices and the matrix-sensing generator.

The objective is ``f(X) = (1/n) sum_i f_i(X)``; for matrix sensing each term
is the square loss ``f_i(X) = (1/2) (y_i - <A_i, X>)^2`` with symmetric
measurement matrices ``A_i``, so every gradient is symmetric and the planted
optimum interpolates all samples exactly.

Instances are immutable after construction and all evaluations are pure, so
they are safe to share across threads.  Per-sample reductions always run in
sequential index order, which keeps solver traces bit-reproducible.
"""

from __future__ import annotations

import abc
from typing import Optional, Sequence

import numpy as np

from . import matcore
from .errors import NumericalError

MAGIC = "LRSDP1"

# Tag words mixed into the instance seed to derive independent substreams.
_CURVATURE_STREAM = 0x6D75


class Objective(abc.ABC):
    """Finite-sum objective ``f = (1/n) sum f_i`` on symmetric matrices."""

    n: int
    dim: int

    @abc.abstractmethod
    def value_full(self, x: np.ndarray) -> float:
        """Objective value at symmetric ``x``."""

    @abc.abstractmethod
    def grad_full(self, x: np.ndarray) -> np.ndarray:
        """Full gradient, a symmetric matrix.  Costs ``n`` sample gradients."""

    @abc.abstractmethod
    def grad_batch(self, x: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """Mini-batch gradient averaged over ``indices``.  Costs ``len(indices)``."""

    def grad_batch_pair(self, x1, x2, indices):
        """Batch gradients at two points sharing one sample gather.

        Semantically ``(grad_batch(x1, idx), grad_batch(x2, idx))``;
        subclasses may fuse the computation.
        """
        return self.grad_batch(x1, indices), self.grad_batch(x2, indices)

    def grad_batch_diff(self, x1, x2, indices):
        """Difference of batch gradients, ``grad_batch(x1) - grad_batch(x2)``.

        The semi-stochastic inner update only consumes this difference, and
        subclasses can often produce it cheaper than the two gradients.
        """
        g1, g2 = self.grad_batch_pair(x1, x2, indices)
        return g1 - g2


def check_batch(indices, n: int) -> np.ndarray:
    """Validate a mini-batch index set: non-empty, distinct, within [0, n)."""
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("mini-batch must be non-empty")
    if idx.size == 1:
        if not 0 <= idx[0] < n:
            raise ValueError(f"batch indices out of range [0, {n})")
        return idx
    if idx.size > n:
        raise ValueError(f"mini-batch size {idx.size} exceeds sample count {n}")
    if idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"batch indices out of range [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError("batch indices must be distinct")
    return idx


class SensingInstance(Objective):
    """Matrix-sensing problem with (optionally) a planted low-rank optimum.

    Attributes
    ----------
    p, r, n : problem dimensions (ambient, rank, sample count)
    a : (n, p, p) symmetrized measurement matrices
    y : (n,) observations
    u_star, x_star : planted factor and optimum, or ``None`` for user data
    l_hat : top eigenvalue of the sample quadratic form (gradient Lipschitz
        estimate for the averaged objective)
    mu_hat : Monte-Carlo lower-curvature estimate over random symmetric
        directions of rank <= 2r; an estimate, not a certificate
    seed : generator seed (also seeds the curvature sampling)
    """

    def __init__(self, p, r, n, a, y, u_star, x_star, seed,
                 planted_spectrum=None, l_hat=None, mu_hat=None):
        self.p = int(p)
        self.r = int(r)
        self.n = int(n)
        self.dim = self.p
        self.a = a
        self.y = y
        self.u_star = u_star
        self.x_star = x_star
        self.seed = int(seed)
        self.planted_spectrum = planted_spectrum
        self._a_flat = a.reshape(self.n, -1)
        if l_hat is None or mu_hat is None:
            l_hat, mu_hat = estimate_curvature(self)
        self.l_hat = float(l_hat)
        self.mu_hat = float(mu_hat)

    # -- objective interface ------------------------------------------------

    def measurements(self, x: np.ndarray) -> np.ndarray:
        """``<A_i, X>`` for all samples, in index order."""
        return self._a_flat @ np.ascontiguousarray(x, dtype=float).ravel()

    def value_full(self, x: np.ndarray) -> float:
        resid = self.y - self.measurements(x)
        return float(0.5 * np.mean(resid * resid))

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        resid = self.y - self.measurements(x)
        g = (-resid / self.n) @ self._a_flat
        return matcore.symmetrize(g.reshape(self.p, self.p))

    def grad_batch(self, x: np.ndarray, indices) -> np.ndarray:
        idx = check_batch(indices, self.n)
        a_sub = self._a_flat[idx]
        resid = self.y[idx] - a_sub @ np.ascontiguousarray(x, dtype=float).ravel()
        g = (-resid / idx.size) @ a_sub
        return matcore.symmetrize(g.reshape(self.p, self.p))

    def grad_batch_pair(self, x1, x2, indices):
        idx = check_batch(indices, self.n)
        a_sub = self._a_flat[idx]
        y_sub = self.y[idx]
        r1 = y_sub - a_sub @ np.ascontiguousarray(x1, dtype=float).ravel()
        r2 = y_sub - a_sub @ np.ascontiguousarray(x2, dtype=float).ravel()
        g1 = (-r1 / idx.size) @ a_sub
        g2 = (-r2 / idx.size) @ a_sub
        return (matcore.symmetrize(g1.reshape(self.p, self.p)),
                matcore.symmetrize(g2.reshape(self.p, self.p)))

    def grad_batch_diff(self, x1, x2, indices):
        # grad_i(X1) - grad_i(X2) = <A_i, X1 - X2> A_i for the square loss,
        # so one weighted sum over the gathered rows suffices.
        idx = check_batch(indices, self.n)
        a_sub = self._a_flat[idx]
        m1 = a_sub @ np.ascontiguousarray(x1, dtype=float).ravel()
        m2 = a_sub @ np.ascontiguousarray(x2, dtype=float).ravel()
        g = ((m1 - m2) / idx.size) @ a_sub
        return matcore.symmetrize(g.reshape(self.p, self.p))

    # -- construction -------------------------------------------------------

    @classmethod
    def from_data(cls, a, y, r, seed=0):
        """Wrap user-supplied measurements; no planted optimum is assumed.

        Measurement matrices are symmetrized, which leaves ``<A_i, X>``
        unchanged on symmetric ``X``.
        """
        a = np.asarray(a, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"measurements must have shape (n, p, p), got {a.shape}")
        if a.shape[0] != y.size:
            raise ValueError(f"{a.shape[0]} measurements vs {y.size} observations")
        n, p = a.shape[0], a.shape[1]
        if not 1 <= r <= p:
            raise ValueError(f"rank r={r} must satisfy 1 <= r <= {p}")
        a_sym = np.ascontiguousarray(0.5 * (a + a.transpose(0, 2, 1)))
        return cls(p=p, r=r, n=n, a=a_sym, y=y, u_star=None, x_star=None, seed=seed)

    def save(self, path) -> None:
        """Write a provenance file; matrices are regenerated from the seed."""
        if self.u_star is None:
            raise ValueError("only generated instances (with a seed provenance) "
                             "can be serialized")
        lines = [MAGIC,
                 f"p={self.p}",
                 f"r={self.r}",
                 f"n={self.n}",
                 f"seed={self.seed}"]
        if self.planted_spectrum is None:
            lines.append("spectrum=")
        else:
            lines.append("spectrum=" + ",".join(repr(float(s))
                                                for s in self.planted_spectrum))
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SensingInstance":
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0] != MAGIC:
            raise ValueError(f"{path} is not a {MAGIC} instance file")
        fields = dict(ln.split("=", 1) for ln in lines[1:])
        spectrum = None
        if fields.get("spectrum"):
            spectrum = tuple(float(v) for v in fields["spectrum"].split(","))
        return generate(p=int(fields["p"]), r=int(fields["r"]), n=int(fields["n"]),
                        seed=int(fields["seed"]), planted_spectrum=spectrum)


def generate(p: int, r: int, n: int, seed: int,
             planted_spectrum: Optional[Sequence[float]] = None) -> SensingInstance:
    """Build a seeded matrix-sensing instance with a planted rank-r optimum.

    Measurements have i.i.d. standard normal entries symmetrized as
    ``(A + A.T) / 2``; the planted factor has i.i.d. standard normal entries,
    optionally rescaled so ``X*`` carries ``planted_spectrum`` as its nonzero
    eigenvalues.  Observations are noiseless: ``y_i = <A_i, X*>`` exactly.
    """
    if not (1 <= r <= p):
        raise ValueError(f"need 1 <= r <= p, got r={r}, p={p}")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, p, p))
    a = np.ascontiguousarray(0.5 * (raw + raw.transpose(0, 2, 1)))
    u_star = rng.standard_normal((p, r))
    spectrum = None
    if planted_spectrum is not None:
        spectrum = tuple(sorted((float(s) for s in planted_spectrum), reverse=True))
        if len(spectrum) != r or spectrum[-1] <= 0:
            raise ValueError("planted_spectrum must hold r positive values")
        w, q = np.linalg.eigh(matcore.gram(u_star))
        order = np.argsort(-w, kind="stable")[:r]
        u_star = q[:, order] * np.sqrt(np.asarray(spectrum))
    x_star = matcore.gram(u_star)
    y = a.reshape(n, -1) @ x_star.ravel()
    return SensingInstance(p=p, r=r, n=n, a=a, y=y, u_star=u_star, x_star=x_star,
                           seed=seed, planted_spectrum=spectrum)


# -- curvature estimation ---------------------------------------------------

def _sym_basis_coords(a_flat: np.ndarray, p: int) -> np.ndarray:
    """Coordinates of symmetric matrices in an orthonormal basis of Sym(p).

    Rows are ``[diag entries, sqrt(2) * upper off-diagonal entries]`` so that
    Euclidean inner products of coordinate vectors equal Frobenius inner
    products of the matrices.
    """
    n = a_flat.shape[0]
    mats = a_flat.reshape(n, p, p)
    iu = np.triu_indices(p, k=1)
    diag = mats[:, np.arange(p), np.arange(p)]
    off = mats[:, iu[0], iu[1]] * np.sqrt(2.0)
    return np.concatenate([diag, off], axis=1)


def estimate_curvature(inst: SensingInstance) -> tuple[float, float]:
    """Estimate ``(l_hat, mu_hat)`` for the quadratic form of an instance.

    ``l_hat`` is the exact top eigenvalue of ``X -> (1/n) sum <A_i, X> A_i``,
    obtained from a dense eigensolve of whichever Gram form is smaller (the
    n x n sample kernel or the p(p+1)/2-dimensional operator matrix; their
    nonzero spectra coincide).  ``mu_hat`` is the smallest Rayleigh quotient
    of the same form over 200 seeded random symmetric directions of rank
    <= 2r, reported as an estimate rather than a certificate.
    """
    n, p, r = inst.n, inst.p, inst.r
    a_flat = inst._a_flat
    d_sym = p * (p + 1) // 2
    try:
        if d_sym <= n:
            coords = _sym_basis_coords(a_flat, p)
            op = coords.T @ coords / n
            l_hat = float(np.linalg.eigvalsh(op)[-1])
        else:
            kernel = a_flat @ a_flat.T / n
            l_hat = float(np.linalg.eigvalsh(kernel)[-1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"curvature eigensolve failed: {exc}") from exc

    rng = np.random.default_rng([_CURVATURE_STREAM, inst.seed])
    n_dirs = 200
    dirs = np.empty((n_dirs, p * p))
    for j in range(n_dirs):
        u1 = rng.standard_normal((p, r))
        u2 = rng.standard_normal((p, r))
        d = matcore.gram(u1) - matcore.gram(u2)
        dirs[j] = d.ravel()
    meas = a_flat @ dirs.T
    quotients = np.sum(meas * meas, axis=0) / (n * np.sum(dirs * dirs, axis=1))
    mu_hat = float(np.min(quotients))
    return l_hat, mu_hat
