"""Closed-form geometry of the unit sphere and the flat torus.

Points are stored as rows of float arrays in ambient coordinates: unit vectors
in R^(n+1) for the sphere, and coordinates in [0, L_i) for the torus. Every
function accepts either a single point (1-d array) or a batch (2-d array).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ManifoldModel",
    "Sphere",
    "FlatTorus",
    "TangentVector",
    "unit_ball_volume",
    "make_manifold",
    "sample_uniform",
    "sample_ball",
    "carry_isometry",
    "geodesic_distance",
    "pairwise_distance",
    "log_map",
    "exp_map",
    "tangent_basis",
    "ricci_quadratic",
    "scalar_curvature",
]


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class ManifoldModel:
    intrinsic_dim: int

    def __post_init__(self):
        if int(self.intrinsic_dim) != self.intrinsic_dim or self.intrinsic_dim < 2:
            raise ValueError(f"intrinsic dimension must be an integer >= 2, got {self.intrinsic_dim}")

    kind = "abstract"

    @property
    def ambient_dim(self) -> int:
        raise NotImplementedError

    @property
    def injectivity_radius(self) -> float:
        raise NotImplementedError

    @property
    def total_volume(self) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"manifold": self.kind, "dim": self.intrinsic_dim}


@dataclass(frozen=True)
class Sphere(ManifoldModel):
    """Unit n-sphere embedded in R^(n+1)."""

    kind = "sphere"

    @property
    def ambient_dim(self) -> int:
        return self.intrinsic_dim + 1

    @property
    def injectivity_radius(self) -> float:
        return math.pi

    @property
    def total_volume(self) -> float:
        n = self.intrinsic_dim
        return 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@dataclass(frozen=True)
class FlatTorus(ManifoldModel):
    """Product of circles with the given side lengths."""

    side_lengths: tuple[float, ...] = field(default=())
    kind = "torus"

    def __post_init__(self):
        super().__post_init__()
        sides = tuple(float(s) for s in self.side_lengths) or (1.0,) * self.intrinsic_dim
        if len(sides) != self.intrinsic_dim:
            raise ValueError(
                f"torus of dimension {self.intrinsic_dim} needs that many side lengths, got {len(sides)}"
            )
        if min(sides) <= 0:
            raise ValueError("torus side lengths must be positive")
        object.__setattr__(self, "side_lengths", sides)

    @property
    def ambient_dim(self) -> int:
        return self.intrinsic_dim

    @property
    def injectivity_radius(self) -> float:
        return min(self.side_lengths) / 2

    @property
    def total_volume(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.side_lengths)

    def describe(self) -> dict:
        return {**super().describe(), "sides": list(self.side_lengths)}


def make_manifold(kind: str, dim: int, sides=None) -> ManifoldModel:
    if kind == "sphere":
        return Sphere(dim)
    if kind == "torus":
        return FlatTorus(dim, tuple(sides) if sides else ())
    raise ValueError(f"unknown manifold kind {kind!r}")


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    @property
    def norm(self):
        """Length of the vector; an array of lengths for a batch."""
        out = np.linalg.norm(self.components, axis=-1)
        return float(out) if out.ndim == 0 else out


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_uniform(manifold: ManifoldModel, count: int, seed) -> np.ndarray:
    """Draw ``count`` i.i.d. points uniform in Riemannian volume."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = _rng(seed)
    if isinstance(manifold, Sphere):
        g = rng.standard_normal((count, manifold.ambient_dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g
    if isinstance(manifold, FlatTorus):
        pts = rng.random((count, manifold.intrinsic_dim)) * manifold.sides
        # rounding can land exactly on L
        return np.where(pts >= manifold.sides, 0.0, pts)
    raise TypeError(f"unsupported manifold {manifold!r}")


def _wrap(delta: np.ndarray, sides: np.ndarray) -> np.ndarray:
    return delta - sides * np.round(delta / sides)


def geodesic_distance(manifold: ManifoldModel, p, q) -> np.ndarray | float:
    """Geodesic distance between matching rows of ``p`` and ``q`` (broadcasting)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if isinstance(manifold, Sphere):
        dot = np.clip(np.sum(p * q, axis=-1), -1.0, 1.0)
        # arccos is ill-conditioned near +-1; use chord formulas there
        near = 2.0 * np.arcsin(np.minimum(np.linalg.norm(p - q, axis=-1) / 2.0, 1.0))
        far = np.pi - 2.0 * np.arcsin(np.minimum(np.linalg.norm(p + q, axis=-1) / 2.0, 1.0))
        out = np.where(dot > 0.9, near, np.where(dot < -0.9, far, np.arccos(dot)))
    elif isinstance(manifold, FlatTorus):
        out = np.linalg.norm(_wrap(q - p, manifold.sides), axis=-1)
    else:
        raise TypeError(f"unsupported manifold {manifold!r}")
    return float(out) if np.ndim(out) == 0 else out


def pairwise_distance(manifold: ManifoldModel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of geodesic distances between rows of ``a`` and rows of ``b``."""
    return geodesic_distance(manifold, np.asarray(a)[:, None, :], np.asarray(b)[None, :, :])


def _log_components(manifold, x, y):
    if isinstance(manifold, Sphere):
        theta = np.asarray(geodesic_distance(manifold, x, y))
        perp = y - np.sum(x * y, axis=-1, keepdims=True) * x
        pnorm = np.linalg.norm(perp, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(pnorm > 0, perp * (theta[..., None] / pnorm), 0.0)
        return v, theta
    if isinstance(manifold, FlatTorus):
        v = _wrap(y - x, manifold.sides)
        return v, np.linalg.norm(v, axis=-1)
    raise TypeError(f"unsupported manifold {manifold!r}")


def log_map(manifold: ManifoldModel, x, y) -> TangentVector:
    """Tangent vector at ``x`` pointing to ``y`` with length ``d(x, y)``.

    Raises:
        ValueError: if ``d(x, y)`` reaches the injectivity radius, where the
            log map is not unique.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v, dist = _log_components(manifold, x, y)
    if np.any(dist >= manifold.injectivity_radius):
        raise ValueError("log map undefined at or beyond the injectivity radius")
    # the torus cut locus sits at half a side along any single axis
    if isinstance(manifold, FlatTorus) and np.any(np.abs(v) >= manifold.sides / 2):
        raise ValueError("log map undefined on the torus cut locus")
    return TangentVector(base=x, components=v)


def exp_map(manifold: ManifoldModel, x, v) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(getattr(v, "components", v), dtype=float)
    if isinstance(manifold, Sphere):
        t = np.linalg.norm(v, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            dirn = np.where(t > 0, v / t, 0.0)
        y = np.cos(t) * x + np.sin(t) * dirn
        return y / np.linalg.norm(y, axis=-1, keepdims=True)
    if isinstance(manifold, FlatTorus):
        return np.mod(x + v, manifold.sides)
    raise TypeError(f"unsupported manifold {manifold!r}")


def tangent_basis(manifold: ManifoldModel, x) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``x`` as rows.

    Gram-Schmidt over the ambient coordinate frame projected onto the tangent
    space; on the torus this is the standard basis.
    """
    n = manifold.intrinsic_dim
    if isinstance(manifold, FlatTorus):
        return np.eye(n)
    x = np.asarray(x, dtype=float)
    basis = []
    # try the frame axes least aligned with x first so projections stay large
    for k in np.argsort(np.abs(x)):
        e = np.zeros_like(x)
        e[k] = 1.0
        e -= np.dot(e, x) * x
        for b in basis:
            e -= np.dot(e, b) * b
        norm = np.linalg.norm(e)
        if norm > 1e-8:
            basis.append(e / norm)
        if len(basis) == n:
            break
    return np.array(basis)


def sample_ball(manifold: ManifoldModel, x, radius: float, count: int, seed) -> np.ndarray:
    """Uniform samples from the closed geodesic ball of ``radius`` around ``x``.

    Torus: rejection from the enclosing cube of offsets. Sphere: the height
    ``h = z . x`` is drawn by rejection from its exact marginal on the cap,
    ``(1 - h^2)^((n-2)/2)`` on ``[cos r, 1]``, and the remaining direction is
    uniform on the unit sphere of the tangent space.
    """
    if radius <= 0 or radius >= manifold.injectivity_radius:
        raise ValueError("ball radius must lie in (0, injectivity radius)")
    rng = _rng(seed)
    x = np.asarray(x, dtype=float)
    n = manifold.intrinsic_dim
    if isinstance(manifold, FlatTorus):
        chunks, have = [], 0
        while have < count:
            offs = (rng.random((max(64, 2 * (count - have)), n)) * 2 - 1) * radius
            offs = offs[np.linalg.norm(offs, axis=1) <= radius]
            chunks.append(offs)
            have += len(offs)
        offs = np.concatenate(chunks)[:count] if chunks else np.empty((0, n))
        return np.mod(x + offs, manifold.sides)
    if not isinstance(manifold, Sphere):
        raise TypeError(f"unsupported manifold {manifold!r}")

    lo = math.cos(radius)
    peak = 1.0 if lo < 0 else 1.0 - lo * lo
    heights, have = [], 0
    while have < count:
        h = rng.uniform(lo, 1.0, max(64, 2 * (count - have)))
        if n > 2:
            keep = rng.random(h.shape) * peak ** ((n - 2) / 2) <= (1 - h * h) ** ((n - 2) / 2)
            h = h[keep]
        heights.append(h)
        have += len(h)
    h = np.concatenate(heights)[:count] if heights else np.empty(0)
    basis = tangent_basis(manifold, x)
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    z = h[:, None] * x + np.sqrt(np.maximum(0.0, 1 - h * h))[:, None] * (u @ basis)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def carry_isometry(manifold: ManifoldModel, x, y, points) -> np.ndarray:
    """Apply the isometry sliding ``x`` to ``y`` along their geodesic.

    Sphere: rotation by ``d(x, y)`` in the plane spanned by ``x`` and
    ``log_x y``, fixing its orthogonal complement. Torus: translation. The
    image of a uniform sample of a ball around ``x`` is a uniform sample of the
    same-radius ball around ``y``.
    """
    v = log_map(manifold, x, y).components
    points = np.asarray(points, dtype=float)
    if isinstance(manifold, FlatTorus):
        return np.mod(points + v, manifold.sides)
    t = float(np.linalg.norm(v))
    if t == 0:
        return points.copy()
    e1 = np.asarray(x, dtype=float)
    e2 = v / t
    c1 = points @ e1
    c2 = points @ e2
    rest = points - np.multiply.outer(c1, e1) - np.multiply.outer(c2, e2)
    cos, sin = math.cos(t), math.sin(t)
    out = rest + np.multiply.outer(c1 * cos - c2 * sin, e1) + np.multiply.outer(c1 * sin + c2 * cos, e2)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def ricci_quadratic(manifold: ManifoldModel, x, v) -> float:
    """Ric_x(v, v): ``(n - 1) |v|^2`` on the unit sphere, 0 on the flat torus."""
    comps = np.asarray(getattr(v, "components", v), dtype=float)
    sq = np.sum(comps * comps, axis=-1)
    if isinstance(manifold, Sphere):
        out = (manifold.intrinsic_dim - 1) * sq
    elif isinstance(manifold, FlatTorus):
        out = np.zeros_like(sq)
    else:
        raise TypeError(f"unsupported manifold {manifold!r}")
    return float(out) if np.ndim(out) == 0 else out


def scalar_curvature(manifold: ManifoldModel, x=None) -> float:
    """Scalar curvature, constant on both model manifolds."""
    if isinstance(manifold, Sphere):
        n = manifold.intrinsic_dim
        return float(n * (n - 1))
    if isinstance(manifold, FlatTorus):
        return 0.0
    raise TypeError(f"unsupported manifold {manifold!r}")
