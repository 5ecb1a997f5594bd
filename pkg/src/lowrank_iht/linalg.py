"""Dense matrix primitives: canonical SVD, hard thresholding, Schatten norms.

Everything here is deterministic. The SVD wrapper fixes the phase ambiguity of
each singular triplet so repeated calls on equal inputs are bit-identical, and
rank-deficient inputs get a canonical basis completion for the zero part of the
spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdConvergenceError",
    "SvdFactors",
    "svd",
    "hard_threshold_entries",
    "hard_threshold_singular",
    "schatten_norm",
    "entrywise_inf_norm",
    "restricted_singular_bound",
    "restricted_singular_bound_check",
]


class SvdConvergenceError(RuntimeError):
    """The underlying LAPACK SVD routine failed to converge."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("empty matrices are not supported")
    if not (np.issubdtype(a.dtype, np.floating) or np.issubdtype(a.dtype, np.complexfloating)):
        a = a.astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors with a fixed sign/phase convention.

    ``left`` and ``right`` have orthonormal columns, ``singular_values`` is
    nonincreasing, and ``left @ diag(singular_values) @ right.conj().T``
    reconstructs the input.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.conj().T

    def rank(self, tol: float = 0.0) -> int:
        return int(np.count_nonzero(self.singular_values > tol))


def _canonical_completion(kept: list, count: int, dim: int, dtype):
    """Orthonormal vectors completing ``kept``, built from canonical basis
    vectors in index order (deterministic, independent of LAPACK's null-space
    choice)."""
    cols = []
    j = 0
    while len(cols) < count and j < dim:
        w = np.zeros(dim, dtype=dtype)
        w[j] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for q in kept:
                w = w - q * (np.conj(q) @ w)
            for q in cols:
                w = w - q * (np.conj(q) @ w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            cols.append(w / nrm)
        j += 1
    if len(cols) < count:
        raise SvdConvergenceError("failed to complete an orthonormal basis")
    return cols


def svd(a) -> SvdFactors:
    """Thin SVD with deterministic factors.

    The phase of each singular triplet is rotated so the largest-modulus entry
    of the left singular vector is real and positive (ties broken by lowest
    index). Singular values that are exactly zero get their columns replaced by
    a canonical completion, so e.g. the zero matrix yields identity factors.
    """
    a = _as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge for shape {a.shape}") from exc
    v = vh.conj().T.copy()
    for j in range(s.size):
        if s[j] == 0.0:
            continue
        col = u[:, j]
        i = int(np.argmax(np.abs(col)))
        mag = abs(col[i])
        if mag > 0.0:
            phase = np.conj(col[i] / mag)
            u[:, j] = col * phase
            v[:, j] = v[:, j] * phase
    nzero = int(np.count_nonzero(s == 0.0))
    if nzero:
        kept_u = [u[:, j] for j in range(s.size) if s[j] != 0.0]
        kept_v = [v[:, j] for j in range(s.size) if s[j] != 0.0]
        for col, q in zip(np.flatnonzero(s == 0.0),
                          _canonical_completion(kept_u, nzero, u.shape[0], u.dtype)):
            u[:, col] = q
        for col, q in zip(np.flatnonzero(s == 0.0),
                          _canonical_completion(kept_v, nzero, v.shape[0], v.dtype)):
            v[:, col] = q
    return SvdFactors(left=u, singular_values=s, right=v)


def _singular_values(a) -> np.ndarray:
    try:
        return np.linalg.svd(_as_matrix(a), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError("singular value computation did not converge") from exc


def hard_threshold_entries(u, threshold: float):
    """Zero out entries with modulus strictly below ``threshold``.

    The comparison is closed: entries with ``|u_i| >= threshold`` survive.
    Works elementwise on arrays of any shape.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    u = np.asarray(u)
    return np.where(np.abs(u) >= threshold, u, np.zeros((), dtype=u.dtype))


def hard_threshold_singular(a, threshold: float) -> np.ndarray:
    """Spectral hard thresholding: keep singular values >= ``threshold``.

    The result has rank equal to the count of singular values at or above the
    threshold.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    f = svd(a)
    kept = np.where(f.singular_values >= threshold, f.singular_values, 0.0)
    return (f.left * kept) @ f.right.conj().T


def schatten_norm(a, p) -> float:
    """Schatten p-norm from singular values; ``p="operator"`` selects the
    largest singular value. ``p`` must be a positive real (p=2 is Frobenius,
    p=1 the nuclear norm)."""
    s = _singular_values(a)
    if isinstance(p, str):
        if p == "operator":
            return float(s[0]) if s.size else 0.0
        raise ValueError(f"unknown norm selector {p!r}")
    p = float(p)
    if not p > 0:
        raise ValueError("p must be positive")
    return float(np.sum(s ** p) ** (1.0 / p))


def entrywise_inf_norm(a) -> float:
    """Largest entry modulus."""
    return float(np.max(np.abs(_as_matrix(a))))


def _stack_vectors(vectors, dim: int) -> np.ndarray:
    rows = []
    for w in vectors:
        w = np.asarray(w)
        if w.ndim != 1 or w.shape[0] != dim:
            raise ValueError("each vector must be 1-D of matching dimension")
        rows.append(w)
    if not rows:
        return np.zeros((0, dim))
    return np.stack(rows)


def restricted_singular_bound(m, vectors) -> float:
    """sup over unit u orthogonal to ``vectors`` and unit v of |u^H m v|.

    Evaluated by projecting the rows of ``m`` onto the orthogonal complement of
    span(vectors) and taking the operator norm. ``vectors`` must be
    orthonormal (checked to 1e-8).
    """
    m = _as_matrix(m)
    w = _stack_vectors(vectors, m.shape[0])
    if w.shape[0]:
        gram = w.conj() @ w.T
        if np.max(np.abs(gram - np.eye(w.shape[0]))) > 1e-8:
            raise ValueError("constraint vectors must be orthonormal")
        m = m - w.conj().T @ (w @ m)
    return schatten_norm(m, "operator")


def restricted_singular_bound_check(m, j: int, vectors) -> bool:
    """Check that the j-th singular value of ``m`` is bounded by the
    restricted supremum over ``j - 1`` orthogonal directions (with 1e-8
    numerical slack). Requires ``len(vectors) == j - 1``."""
    m = _as_matrix(m)
    s = _singular_values(m)
    if not 1 <= j <= s.size:
        raise ValueError(f"j must be in [1, {s.size}]")
    vectors = list(vectors)
    if len(vectors) != j - 1:
        raise ValueError(f"need exactly {j - 1} constraint vectors for j={j}")
    return bool(s[j - 1] <= restricted_singular_bound(m, vectors) + 1e-8)
