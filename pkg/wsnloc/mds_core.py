"""Classical MDS-MAP building blocks and alignment metrics.

Similarity matrices hold squared distances (m²). Double centering turns them
into the Gram matrix of barycentric coordinates, whose top-p eigenpairs give
the positions up to a rigid transformation.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .const import (
    ALIGN_ANCHOR,
    ALIGN_NONE,
    ALIGN_PROCRUSTES,
    SYMMETRY_TOLERANCE,
)
from .exceptions import DegenerateGeometryError, DomainError
from .utils.logger import _LOGGER, INDENT

# eigenvalues at or below this fraction of the largest one count as zero
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class Scenario:
    """Ground truth of a deployment.

    positions: N×p true coordinates (meters)
    anchors: indices of nodes whose positions are known
    area: (low, high) bounds per axis (meters)
    """

    positions: np.ndarray
    anchors: tuple[int, ...] = ()
    area: tuple[tuple[float, float], ...] = ()
    p: int = field(init=False)

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2:
            raise DomainError(f"Positions must be an N×p matrix, got shape {positions.shape}")
        n, p = positions.shape
        if p not in (2, 3):
            raise DomainError(f"Embedding dimension must be 2 or 3, got {p}")
        if n < p + 1:
            raise DomainError(f"Need at least p+1={p + 1} nodes, got {n}")
        anchors = tuple(sorted({int(a) for a in self.anchors}))
        if any(a < 0 or a >= n for a in anchors):
            raise DomainError(f"Anchor indices must lie in [0, {n}), got {anchors}")
        area = self.area or tuple(
            (float(lo), float(hi))
            for lo, hi in zip(positions.min(axis=0), positions.max(axis=0))
        )
        if len(area) != p:
            raise DomainError(f"Area must give bounds for {p} axes, got {area}")
        lows = np.array([lo for lo, _ in area])
        highs = np.array([hi for _, hi in area])
        slack = 1e-9 * max(1.0, float(np.max(np.abs(highs - lows))))
        if np.any(positions < lows - slack) or np.any(positions > highs + slack):
            raise DomainError(f"All positions must lie inside the area {area}")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "area", tuple(area))
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.positions.shape[0]

    @property
    def unknown(self) -> tuple[int, ...]:
        """Indices of nodes with unknown positions."""
        anchors = set(self.anchors)
        return tuple(i for i in range(self.n) if i not in anchors)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """N×N matrix of squared distances (m²)."""

    s: np.ndarray

    def check(self, tol: float = 1e-9) -> None:
        """Validate symmetry, zero diagonal and non-negativity."""
        scale = max(1.0, float(np.max(np.abs(self.s)))) if self.s.size else 1.0
        if not np.allclose(self.s, self.s.T, atol=tol * scale, rtol=0.0):
            raise DomainError("Similarity matrix is not symmetric")
        if np.any(np.abs(np.diag(self.s)) > tol * scale):
            raise DomainError("Similarity matrix has a non-zero diagonal")
        if np.any(self.s < -tol * scale):
            raise DomainError("Similarity matrix has negative entries")


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """N×N doubly centered matrix M = −½ J⊥ S J⊥ (m²)."""

    m: np.ndarray


@dataclass(frozen=True, eq=False)
class Alignment:
    """Rigid alignment result: aligned = est @ rotation.T + translation."""

    aligned: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    residual: float
    translation_only: bool = False

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map further points with the fitted transformation."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def _matrix(value: SimilarityMatrix | GramMatrix | np.ndarray) -> np.ndarray:
    if isinstance(value, SimilarityMatrix):
        return np.asarray(value.s, dtype=float)
    if isinstance(value, GramMatrix):
        return np.asarray(value.m, dtype=float)
    return np.asarray(value, dtype=float)


def squared_distances(points: np.ndarray) -> np.ndarray:
    """Return the N×N matrix of squared Euclidean distances between rows."""
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def similarity_from_positions(scenario: Scenario | np.ndarray) -> SimilarityMatrix:
    """Build the exact similarity matrix s(i,j) = ‖z_i − z_j‖²."""
    points = scenario.positions if isinstance(scenario, Scenario) else scenario
    return SimilarityMatrix(squared_distances(points))


def centering_matrix(n: int) -> np.ndarray:
    """Return J⊥ = I − 11ᵀ/N."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def symmetrize(s: SimilarityMatrix | np.ndarray) -> np.ndarray:
    """Average a matrix with its transpose."""
    s = _matrix(s)
    return 0.5 * (s + s.T)


def double_center(s: SimilarityMatrix | np.ndarray) -> GramMatrix:
    """Return M = −½ J⊥ S J⊥."""
    s = _matrix(s)
    # row/column mean removal is J⊥ S J⊥ without forming J⊥
    row = s.mean(axis=1, keepdims=True)
    col = s.mean(axis=0, keepdims=True)
    return GramMatrix(-0.5 * (s - row - col + s.mean()))


def gram_entry_decomposed(i: int, j: int, s: SimilarityMatrix | np.ndarray) -> float:
    """Evaluate M(i,j) = (d̄²(i) + d̄²(j))/2 − (d_ij² + δ)/2.

    d̄²(i) is the row average of S and δ the average of all its entries.
    """
    s = _matrix(s)
    row_avg = s.mean(axis=1)
    delta = float(s.mean())
    return float(0.5 * (row_avg[i] + row_avg[j]) - 0.5 * (s[i, j] + delta))


def top_eigs(m: GramMatrix | np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the p largest eigenvalues (descending) and their unit eigenvectors.

    Eigenvector signs are fixed so that the largest-magnitude entry of each
    column is positive.
    """
    m = _matrix(m)
    n = m.shape[0]
    if m.shape != (n, n):
        raise DomainError(f"Expected a square matrix, got shape {m.shape}")
    if not 1 <= p <= n:
        raise DomainError(f"Requested {p} eigenpairs from a {n}×{n} matrix")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOLERANCE * scale:
        raise DomainError(f"Matrix is not symmetric (max asymmetry {asym:.3g})")

    values, vectors = scipy.linalg.eigh(m, subset_by_index=[n - p, n - 1])
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for k in range(p):
        pivot = np.argmax(np.abs(vectors[:, k]))
        if vectors[pivot, k] < 0:
            vectors[:, k] = -vectors[:, k]
    return values, vectors


def batch_mds(s_hat: SimilarityMatrix | np.ndarray, p: int) -> np.ndarray:
    """Centralized batch MDS-MAP.

    Symmetrizes Ŝ, double-centers it and returns (√λ₁u₁, …, √λ_p u_p).
    """
    s_hat = symmetrize(s_hat)
    gram = double_center(s_hat)
    values, vectors = top_eigs(gram, p)
    if values[-1] <= RANK_TOLERANCE * max(abs(values[0]), 1e-300):
        _LOGGER.error(
            "::batch_mds:: eigenvalue λ_%d = %.6g is not positive", p, values[-1]
        )
        raise DegenerateGeometryError(
            f"Degenerate geometry: λ_{p} = {values[-1]:.6g} is not positive",
            eigenvalue=float(values[-1]),
        )
    return vectors * np.sqrt(values)


def column_rank(u: np.ndarray) -> int:
    """Numerical rank of u; UᵀU eigenvalues below RANK_TOLERANCE of the largest count as zero."""
    singular = np.linalg.svd(np.asarray(u, dtype=float), compute_uv=False)
    if singular.size == 0 or singular[0] == 0:
        return 0
    return int(np.sum(singular**2 > RANK_TOLERANCE * singular[0] ** 2))


def principal_projector(u: np.ndarray) -> np.ndarray:
    """Return the orthogonal projector onto the column span of u."""
    u = np.asarray(u, dtype=float)
    rank = column_rank(u)
    if rank < u.shape[1]:
        raise DomainError(
            f"Columns of U span a {rank}-dimensional space, need {u.shape[1]}; "
            "the estimates collapsed onto fewer directions"
        )
    return u @ np.linalg.solve(u.T @ u, u.T)


def procrustes_align(
    est: np.ndarray,
    truth: np.ndarray,
    anchor_mode: bool = False,
    anchors: Sequence[int] = (),
) -> Alignment:
    """Fit the orthogonal matrix and translation that best map est onto truth.

    Reflections are allowed and no scaling is applied. With anchor_mode the
    fit uses the anchor rows only; the transform is applied to every row.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise DomainError(f"Shape mismatch: {est.shape} vs {truth.shape}")
    n, p = est.shape
    idx = np.asarray(anchors if anchor_mode else range(n), dtype=int)
    if anchor_mode and idx.size == 0:
        raise DomainError("Anchor alignment requested without anchors")
    if idx.size < p and not anchor_mode:
        raise DomainError(f"Need N ≥ p for alignment, got N={n}, p={p}")

    a = est[idx]
    b = truth[idx]
    centroid_a = a.mean(axis=0)
    centroid_b = b.mean(axis=0)
    cross = (a - centroid_a).T @ (b - centroid_b)
    u, sing, vt = np.linalg.svd(cross)
    translation_only = sing[0] <= 1e-300 or sing[-1] <= 1e-12 * sing[0]
    if translation_only:
        _LOGGER.warning(
            "::procrustes_align:: rank-deficient cross-covariance, aligning translation only"
        )
        rotation = np.eye(p)
    else:
        rotation = vt.T @ u.T
    translation = centroid_b - rotation @ centroid_a
    aligned = est @ rotation.T + translation
    residual = float(np.sum((aligned[idx] - b) ** 2))
    _LOGGER.debug(f"{INDENT}procrustes fit over {idx.size} rows, residual {residual:.3g}")
    return Alignment(aligned, rotation, translation, residual, translation_only)


def rmse(
    est: np.ndarray,
    truth: np.ndarray,
    align: str = ALIGN_NONE,
    anchors: Sequence[int] = (),
) -> float:
    """Root-mean-square position error after the requested alignment."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise DomainError(f"Shape mismatch: {est.shape} vs {truth.shape}")
    if align == ALIGN_PROCRUSTES:
        est = procrustes_align(est, truth).aligned
    elif align == ALIGN_ANCHOR:
        est = procrustes_align(est, truth, anchor_mode=True, anchors=anchors).aligned
    elif align != ALIGN_NONE:
        raise DomainError(f"Unknown alignment mode: {align}")
    return float(np.sqrt(np.mean(np.sum((est - truth) ** 2, axis=1))))
