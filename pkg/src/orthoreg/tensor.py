"""Dense numerical kernels: covariance/correlation, a symmetric Jacobi
eigensolver, singular values, the symmetric matrix exponential, and the
normalized eigenvalue sum (NESum) collapse metric.

Matrices are plain 2-D float64 ``numpy.ndarray`` objects throughout the
package; every public operation validates shape and finiteness at its
boundary. The eigensolver is a cyclic Jacobi iteration with a round-robin
(parallel) ordering: each round rotates a set of disjoint index pairs,
which keeps the schedule deterministic and lets the updates vectorize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotSymmetric, ShapeMismatch

SYM_TOL = 1e-10
JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# above this order, eigendecompositions route to LAPACK: a Python-level
# Jacobi sweep costs ~30x more than its compiled equivalent, which would
# dominate the spectrum-diagnostics pipeline at embedding width 512
JACOBI_DISPATCH_MAX_N = 128
CORRELATION_EPS = 1e-8
NESUM_EPS = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ShapeMismatch(f"{name} contains non-finite entries")
    return m


def spmm(op, m) -> np.ndarray:
    """Sparse-dense product ``op @ m`` for a normalized graph operator.

    ``op`` is a :class:`orthoreg.graphio.NormalizedOperator`; ``m`` has one
    row per node.
    """
    m = as_matrix(m)
    if op.n_nodes != m.shape[0]:
        raise ShapeMismatch(
            f"operator acts on {op.n_nodes} nodes but matrix has {m.shape[0]} rows"
        )
    return np.asarray(op.matrix @ m, dtype=np.float64)


def spmm_t(op, m) -> np.ndarray:
    """Product with the transposed operator, ``op.T @ m`` (backward passes)."""
    m = as_matrix(m)
    if op.n_nodes != m.shape[0]:
        raise ShapeMismatch(
            f"operator acts on {op.n_nodes} nodes but matrix has {m.shape[0]} rows"
        )
    return np.asarray(op.matrix.T @ m, dtype=np.float64)


def covariance(h) -> np.ndarray:
    """Column covariance of the rows of ``h`` with divisor N (not N-1)."""
    h = as_matrix(h, "h")
    centered = h - h.mean(axis=0, keepdims=True)
    sig = centered.T @ centered / h.shape[0]
    return (sig + sig.T) / 2.0


def correlation(h, eps: float = CORRELATION_EPS) -> np.ndarray:
    """Column correlation matrix C[k,k'] = Sig[k,k'] / sqrt((Sig[k,k]+eps)(Sig[k',k']+eps)).

    The eps guard keeps constant columns finite (their row/column goes to
    ~zero instead of 0/0).
    """
    h = as_matrix(h, "h")
    if h.shape[0] < 2:
        raise ShapeMismatch("correlation needs at least 2 rows")
    sig = covariance(h)
    scale = np.sqrt(np.diag(sig) + eps)
    return sig / np.outer(scale, scale)


def _check_symmetric(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"{name} is not square: {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if float(np.abs(m - m.T).max(initial=0.0)) > SYM_TOL * scale:
        raise NotSymmetric(f"{name} is not symmetric within {SYM_TOL:g}")
    return (m + m.T) / 2.0


def _round_robin_rounds(n: int):
    """Round-robin schedule: n-1 rounds of disjoint index pairs covering
    every unordered pair exactly once (circle method; odd n gets a bye)."""
    m = n + (n % 2)
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        lineup = [0] + others
        p = np.array(lineup[: m // 2], dtype=np.intp)
        q = np.array(lineup[m // 2:][::-1], dtype=np.intp)
        keep = (p < n) & (q < n)
        lo = np.minimum(p[keep], q[keep])
        hi = np.maximum(p[keep], q[keep])
        rounds.append((lo, hi))
        others = others[-1:] + others[:-1]
    return rounds


def jacobi_eigh(m, want_vectors: bool = True):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values sorted non-ascending and
    vectors (columns) aligned; ``vectors`` is None when not requested.
    Convergence: off-diagonal Frobenius norm below ``JACOBI_OFF_TOL``
    relative to the input Frobenius norm, capped at ``JACOBI_MAX_SWEEPS``
    sweeps.
    """
    a = as_matrix(m, "m").copy()
    a = _check_symmetric(a, "m")
    n = a.shape[0]
    if n == 1:
        vals = a.reshape(1).copy()
        vecs = np.ones((1, 1)) if want_vectors else None
        return vals, vecs

    v = np.eye(n) if want_vectors else None
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return np.zeros(n), v
    target = JACOBI_OFF_TOL * fro
    rounds = _round_robin_rounds(n)

    for _ in range(JACOBI_MAX_SWEEPS):
        # measure the off-diagonal norm directly; the sum(a^2)-sum(diag^2)
        # shortcut cancels catastrophically near convergence
        od = a.copy()
        np.fill_diagonal(od, 0.0)
        off = float(np.linalg.norm(od))
        if off <= target:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 0.0
            if not np.any(active):
                continue
            app = a[p, p]
            aqq = a[q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                tau = (aqq - app) / (2.0 * apq)
                root = np.sqrt(1.0 + tau * tau)
                t = np.where(tau >= 0.0, 1.0 / (tau + root), 1.0 / (tau - root))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # pairs within a round are disjoint, so batched row/column
            # rotations compose exactly
            rp = c[:, None] * a[p, :] - s[:, None] * a[q, :]
            rq = s[:, None] * a[p, :] + c[:, None] * a[q, :]
            a[p, :] = rp
            a[q, :] = rq
            cp = c[None, :] * a[:, p] - s[None, :] * a[:, q]
            cq = s[None, :] * a[:, p] + c[None, :] * a[:, q]
            a[:, p] = cp
            a[:, q] = cq
            a[p, q] = 0.0
            a[q, p] = 0.0
            if want_vectors:
                vp = c[None, :] * v[:, p] - s[None, :] * v[:, q]
                vq = s[None, :] * v[:, p] + c[None, :] * v[:, q]
                v[:, p] = vp
                v[:, q] = vq
    else:
        raise NoConvergence(
            f"Jacobi iteration did not reach off-diagonal norm {target:g} "
            f"in {JACOBI_MAX_SWEEPS} sweeps"
        )

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    if want_vectors:
        v = v[:, order]
    return vals, v


def _eigh_dispatch(m, want_vectors: bool):
    """Jacobi up to ``JACOBI_DISPATCH_MAX_N``, LAPACK beyond; identical
    contract (non-ascending values, aligned column eigenvectors)."""
    a = _check_symmetric(as_matrix(m, "m"), "m")
    if a.shape[0] <= JACOBI_DISPATCH_MAX_N:
        return jacobi_eigh(a, want_vectors=want_vectors)
    if want_vectors:
        vals, vecs = np.linalg.eigh(a)
        return vals[::-1].copy(), vecs[:, ::-1].copy()
    return np.linalg.eigvalsh(a)[::-1].copy(), None


def sym_eigvals(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted non-ascending."""
    vals, _ = _eigh_dispatch(m, want_vectors=False)
    return vals


def sym_eig(m):
    """(values, vectors) of a symmetric matrix, values non-ascending and
    eigenvector columns aligned."""
    return _eigh_dispatch(m, want_vectors=True)


def singular_values(w) -> np.ndarray:
    """Singular values sqrt(eig(W^T W)), non-ascending, clamped at zero."""
    w = as_matrix(w, "w")
    gram = w.T @ w
    vals = sym_eigvals((gram + gram.T) / 2.0)
    return np.sqrt(np.clip(vals, 0.0, None))


def expm_sym(p, t: float) -> np.ndarray:
    """exp(P t) for symmetric P via full eigendecomposition."""
    vals, vecs = _eigh_dispatch(p, want_vectors=True)
    return (vecs * np.exp(vals * t)) @ vecs.T


def nesum(eigenvalues, eps: float = NESUM_EPS) -> float:
    """Normalized eigenvalue sum: sum(lambda_i) / max(lambda_1, eps).

    Input must be non-empty and sorted non-ascending; low values flag a
    spectrum dominated by its top eigenvalue.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if lam.size == 0:
        raise ShapeMismatch("nesum needs a non-empty eigenvalue array")
    scale = max(1.0, float(np.abs(lam).max()))
    if np.any(np.diff(lam) > 1e-12 * scale):
        raise ShapeMismatch("eigenvalues must be sorted non-ascending")
    return float(lam.sum() / max(lam[0], eps))


@dataclass(frozen=True)
class EigenReport:
    """Sorted correlation-matrix eigenvalues plus NESum at one epoch."""

    epoch: int
    eigenvalues: np.ndarray
    nesum: float

    def ratio(self, i: int) -> float:
        """lambda_i / lambda_1 with 1-based index i."""
        lam = self.eigenvalues
        return float(lam[i - 1] / max(lam[0], NESUM_EPS))


def eigen_report(h, epoch: int = 0, eps: float = CORRELATION_EPS) -> EigenReport:
    """Eigen report of the column correlation matrix of ``h``."""
    lam = sym_eigvals(correlation(h, eps=eps))
    return EigenReport(epoch=int(epoch), eigenvalues=lam, nesum=nesum(lam))
