"""Geometric functionals of closed polygons.

Distances are in the curve's own length units. The writhe matrix stores the
raw signed solid angle of each ordered segment pair, so ``W.sum() / 4pi`` is the
total writhe and ``abs(W).sum() / 4pi`` the average crossing number.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import pdist, squareform

from . import _accel
from ._accel import jit
from .lattice import LatticePolygon, PolygonalCurve

FOUR_PI = 4.0 * math.pi
PEAK_TOLERANCES = (5, 10, 20)

# generic direction inside the (+,+,+) octant; see lattice_writhe
OCTANT_TILT = np.array([1.0, math.sqrt(5.0) - 1.0, math.sqrt(3.0) - 1.0])
OCTANT_SIGNS = np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]], dtype=np.float64)


def _coords(curve):
    if isinstance(curve, (PolygonalCurve, LatticePolygon)):
        return np.asarray(curve.vertices, dtype=np.float64)
    return np.asarray(curve, dtype=np.float64)


# ---------------------------------------------------------------------------
# distance based


def pairwise_distance_matrix(curve):
    return squareform(pdist(_coords(curve)))


def sigma_plus(M):
    """Sum of |x_i - x_j| over ordered pairs."""
    return float(np.sum(M))


def max_pairwise(M):
    return float(np.max(M))


def peak_count(M, n):
    """Number of 4-connected patches of the strict upper triangle where M > n."""
    if n < 0:
        raise ValueError("tolerance must be non-negative")
    mask = np.triu(np.asarray(M) > n, k=1)
    _, count = ndimage.label(mask)
    return int(count)


def radius_of_gyration(curve):
    x = _coords(curve)
    centred = x - x.mean(axis=0)
    # (1/N^2) sum_ij |x_i - x_j|^2 == 2 * mean |x_i - c|^2
    return float(math.sqrt(2.0 * np.mean(np.sum(centred**2, axis=1))))


def long_range_entanglement(curve, d_L=5.0, d_p=10, mode="long-range"):
    """Count vertex pairs closer than ``d_L`` in space.

    ``mode="long-range"`` keeps pairs whose cyclic index separation exceeds
    ``d_p``; ``mode="literal"`` keeps those below it.
    """
    x = _coords(curve)
    n = len(x)
    if d_L <= 0 or not 0 < d_p < n / 2:
        raise ValueError(f"invalid thresholds d_L={d_L}, d_p={d_p} for N={n}")
    i, j = np.triu_indices(n, k=1)
    q = j - i
    sep = np.minimum(q, n - q)
    close = np.linalg.norm(x[i] - x[j], axis=1) < d_L
    if mode == "long-range":
        return int(np.count_nonzero(close & (sep > d_p)))
    if mode == "literal":
        return int(np.count_nonzero(close & (sep < d_p)))
    raise ValueError(f"unknown mode {mode!r}")


def total_curvature(curve):
    """Sum of exterior angles between consecutive edge vectors (radians)."""
    x = _coords(curve)
    e = np.roll(x, -1, axis=0) - x
    prev = np.roll(e, 1, axis=0)
    cos = np.sum(prev * e, axis=1) / (np.linalg.norm(prev, axis=1) * np.linalg.norm(e, axis=1))
    return float(np.sum(np.arccos(np.clip(cos, -1.0, 1.0))))


# ---------------------------------------------------------------------------
# writhe


@jit
def omega(x1, y1, z1, x2, y2, z2, x3, y3, z3, x4, y4, z4):
    """Signed solid angle swept between segments (p1, p2) and (p3, p4)."""
    r12x, r12y, r12z = x2 - x1, y2 - y1, z2 - z1
    r34x, r34y, r34z = x4 - x3, y4 - y3, z4 - z3
    r13x, r13y, r13z = x3 - x1, y3 - y1, z3 - z1
    r14x, r14y, r14z = x4 - x1, y4 - y1, z4 - z1
    r23x, r23y, r23z = x3 - x2, y3 - y2, z3 - z2
    r24x, r24y, r24z = x4 - x2, y4 - y2, z4 - z2
    cx = r34y * r12z - r34z * r12y
    cy = r34z * r12x - r34x * r12z
    cz = r34x * r12y - r34y * r12x
    triple = cx * r13x + cy * r13y + cz * r13z
    scale = (math.sqrt(r12x * r12x + r12y * r12y + r12z * r12z)
             * math.sqrt(r34x * r34x + r34y * r34y + r34z * r34z)
             * math.sqrt(r13x * r13x + r13y * r13y + r13z * r13z))
    if abs(triple) <= 1e-13 * scale:
        return 0.0
    # n1 = r13 x r14, n2 = r14 x r24, n3 = r24 x r23, n4 = r23 x r13
    n1x = r13y * r14z - r13z * r14y
    n1y = r13z * r14x - r13x * r14z
    n1z = r13x * r14y - r13y * r14x
    n2x = r14y * r24z - r14z * r24y
    n2y = r14z * r24x - r14x * r24z
    n2z = r14x * r24y - r14y * r24x
    n3x = r24y * r23z - r24z * r23y
    n3y = r24z * r23x - r24x * r23z
    n3z = r24x * r23y - r24y * r23x
    n4x = r23y * r13z - r23z * r13y
    n4y = r23z * r13x - r23x * r13z
    n4z = r23x * r13y - r23y * r13x
    l1 = math.sqrt(n1x * n1x + n1y * n1y + n1z * n1z)
    l2 = math.sqrt(n2x * n2x + n2y * n2y + n2z * n2z)
    l3 = math.sqrt(n3x * n3x + n3y * n3y + n3z * n3z)
    l4 = math.sqrt(n4x * n4x + n4y * n4y + n4z * n4z)
    if l1 == 0.0 or l2 == 0.0 or l3 == 0.0 or l4 == 0.0:
        return 0.0
    d12 = (n1x * n2x + n1y * n2y + n1z * n2z) / (l1 * l2)
    d23 = (n2x * n3x + n2y * n3y + n2z * n3z) / (l2 * l3)
    d34 = (n3x * n4x + n3y * n4y + n3z * n4z) / (l3 * l4)
    d41 = (n4x * n1x + n4y * n1y + n4z * n1z) / (l4 * l1)
    total = (math.asin(min(1.0, max(-1.0, d12))) + math.asin(min(1.0, max(-1.0, d23)))
             + math.asin(min(1.0, max(-1.0, d34))) + math.asin(min(1.0, max(-1.0, d41))))
    return total if triple > 0.0 else -total


@jit
def segment_omega(c, i, j):
    n = c.shape[0]
    i2 = (i + 1) % n
    j2 = (j + 1) % n
    return omega(c[i, 0], c[i, 1], c[i, 2], c[i2, 0], c[i2, 1], c[i2, 2],
                 c[j, 0], c[j, 1], c[j, 2], c[j2, 0], c[j2, 1], c[j2, 2])


@jit
def writhe_matrix_kernel(c):
    n = c.shape[0]
    W = np.zeros((n, n))
    degenerate = 0
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            w = segment_omega(c, i, j)
            if w == 0.0:
                degenerate += 1
            W[i, j] = w
            W[j, i] = w
    return W, degenerate


def writhe_matrix_numpy(c):
    """Vectorised twin of :func:`writhe_matrix_kernel`."""
    c = np.asarray(c, dtype=np.float64)
    n = len(c)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    p1, p2 = c[i], c[(i + 1) % n]
    p3, p4 = c[j], c[(j + 1) % n]
    r12, r34 = p2 - p1, p4 - p3
    r13, r14, r23, r24 = p3 - p1, p4 - p1, p3 - p2, p4 - p2
    triple = np.einsum("ij,ij->i", np.cross(r34, r12), r13)
    scale = (np.linalg.norm(r12, axis=1) * np.linalg.norm(r34, axis=1)
             * np.linalg.norm(r13, axis=1))
    normals = [np.cross(r13, r14), np.cross(r14, r24), np.cross(r24, r23), np.cross(r23, r13)]
    lengths = [np.linalg.norm(m, axis=1) for m in normals]
    ok = (np.abs(triple) > 1e-13 * scale)
    for ln in lengths:
        ok &= ln > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = [m / ln[:, None] for m, ln in zip(normals, lengths)]
        total = sum(np.arcsin(np.clip(np.einsum("ij,ij->i", unit[k], unit[(k + 1) % 4]), -1, 1))
                    for k in range(4))
    w = np.where(ok, total * np.sign(triple), 0.0)
    W = np.zeros((n, n))
    W[i, j] = w
    W[j, i] = w
    return W, int(np.count_nonzero(w == 0.0))


@dataclass
class WritheMatrix:
    """Raw solid angles for every ordered segment pair (zero on and next to the diagonal)."""

    entries: np.ndarray
    degenerate: int = 0

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def mirror(self):
        return WritheMatrix(-self.entries, self.degenerate)


def writhe_matrix(curve):
    c = _coords(curve)
    if _accel.ENABLED:
        W, deg = writhe_matrix_kernel(c)
    else:
        W, deg = writhe_matrix_numpy(c)
    return WritheMatrix(W, deg)


def _entries(W):
    return W.entries if isinstance(W, WritheMatrix) else np.asarray(W)


def total_writhe(W):
    return float(np.sum(_entries(W)) / FOUR_PI)


def acn(W):
    return float(np.sum(np.abs(_entries(W))) / FOUR_PI)


# ---------------------------------------------------------------------------
# projections


def projection_basis(d):
    d = np.asarray(d, dtype=np.float64)
    d = d / np.linalg.norm(d)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, d)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return d, e1, e2


@jit
def crossings_kernel(c, d, e1, e2, out):
    """Planar crossings of the projection along ``d`` (viewer at +d).

    Rows of ``out``: seg_a, seg_b, s_a, s_b, a_is_over, sign. Returns the
    crossing count, -1 on a non-generic configuration, -2 when ``out`` is full.
    """
    n = c.shape[0]
    px = np.empty(n)
    py = np.empty(n)
    h = np.empty(n)
    for k in range(n):
        px[k] = c[k, 0] * e1[0] + c[k, 1] * e1[1] + c[k, 2] * e1[2]
        py[k] = c[k, 0] * e2[0] + c[k, 1] * e2[1] + c[k, 2] * e2[2]
        h[k] = c[k, 0] * d[0] + c[k, 1] * d[1] + c[k, 2] * d[2]
    count = 0
    eps = 1e-10
    for a in range(n):
        a2 = (a + 1) % n
        ax0, ay0 = px[a], py[a]
        adx, ady = px[a2] - ax0, py[a2] - ay0
        amin_x, amax_x = min(ax0, px[a2]), max(ax0, px[a2])
        amin_y, amax_y = min(ay0, py[a2]), max(ay0, py[a2])
        la = math.sqrt(adx * adx + ady * ady)
        for b in range(a + 2, n):
            if a == 0 and b == n - 1:
                continue
            b2 = (b + 1) % n
            if max(px[b], px[b2]) < amin_x - eps or min(px[b], px[b2]) > amax_x + eps:
                continue
            if max(py[b], py[b2]) < amin_y - eps or min(py[b], py[b2]) > amax_y + eps:
                continue
            bdx, bdy = px[b2] - px[b], py[b2] - py[b]
            lb = math.sqrt(bdx * bdx + bdy * bdy)
            den = adx * bdy - ady * bdx
            wx, wy = px[b] - ax0, py[b] - ay0
            if abs(den) <= 1e-12 * (la * lb + 1e-300):
                # parallel in projection: degenerate only if collinear and overlapping
                if abs(wx * ady - wy * adx) <= 1e-9 * (la + 1.0):
                    return -1
                continue
            s = (wx * bdy - wy * bdx) / den
            t = (wx * ady - wy * adx) / den
            if s < -eps or s > 1.0 + eps or t < -eps or t > 1.0 + eps:
                continue
            if s < eps or s > 1.0 - eps or t < eps or t > 1.0 - eps:
                return -1
            ha = h[a] + s * (h[a2] - h[a])
            hb = h[b] + t * (h[b2] - h[b])
            if abs(ha - hb) <= 1e-9:
                return -1
            if count >= out.shape[0]:
                return -2
            a_over = ha > hb
            # (t_over x t_under) . d equals the 2D cross product in (e1, e2)
            sgn = 1.0 if den > 0 else -1.0
            if not a_over:
                sgn = -sgn
            out[count, 0] = a
            out[count, 1] = b
            out[count, 2] = s
            out[count, 3] = t
            out[count, 4] = 1.0 if a_over else 0.0
            out[count, 5] = sgn
            count += 1
    return count


class DegenerateProjection(RuntimeError):
    pass


def projection_crossings(curve, direction):
    """Crossing table for one projection; raises on a non-generic direction."""
    c = _coords(curve)
    d, e1, e2 = projection_basis(direction)
    cap = max(64, 4 * len(c))
    while True:
        out = np.empty((cap, 6))
        count = crossings_kernel(c, d, e1, e2, out)
        if count == -2:
            cap *= 4
            continue
        if count == -1:
            raise DegenerateProjection(f"non-generic projection direction {direction}")
        return out[:count].copy()


def tilted(direction, attempt):
    """Deterministic small perturbation of ``direction`` (attempt 0 is unchanged)."""
    direction = np.asarray(direction, dtype=np.float64)
    if attempt == 0:
        return direction
    wobble = np.array([math.sqrt(2.0), math.sqrt(7.0), math.sqrt(11.0)]) % 1.0 - 0.5
    return direction + 1e-3 * attempt * wobble * np.linalg.norm(direction)


def tait_number(curve, direction, attempts=32):
    for attempt in range(attempts):
        try:
            table = projection_crossings(curve, tilted(direction, attempt))
        except DegenerateProjection:
            continue
        return int(round(table[:, 5].sum()))
    raise DegenerateProjection(f"no generic tilt of {direction} after {attempts} attempts")


def lattice_writhe(poly):
    """Exact writhe of a lattice polygon: mean Tait number over the four octant classes."""
    coords = poly.vertices if isinstance(poly, LatticePolygon) else np.asarray(poly)
    return sum(tait_number(coords, s * OCTANT_TILT) for s in OCTANT_SIGNS) / 4.0


# ---------------------------------------------------------------------------
# bundle


@dataclass(frozen=True)
class FunctionalVector:
    Sigma_plus: float
    Omega_plus: float
    kappa_plus: float
    M: float
    Pi_5: int
    Pi_10: int
    Pi_20: int
    ACN: float
    E: int
    R_g: float

    def as_dict(self):
        return asdict(self)


FUNCTIONAL_NAMES = tuple(FunctionalVector.__dataclass_fields__)
TABLE_FUNCTIONALS = ("Sigma_plus", "Omega_plus", "kappa_plus", "M", "Pi_5", "Pi_10", "Pi_20")


def functional_vector(curve, lattice_poly=None, d_L=5.0, d_p=10):
    if not isinstance(curve, PolygonalCurve):
        curve = PolygonalCurve(_coords(curve))
    M = pairwise_distance_matrix(curve)
    W = writhe_matrix(curve)
    wr = lattice_writhe(lattice_poly) if lattice_poly is not None else total_writhe(W)
    # no pair can be separated by more than N/2, so short curves score 0
    E = long_range_entanglement(curve, d_L, d_p) if d_p < len(curve) / 2 else 0
    return FunctionalVector(
        Sigma_plus=sigma_plus(M),
        Omega_plus=wr,
        kappa_plus=total_curvature(curve),
        M=max_pairwise(M),
        Pi_5=peak_count(M, 5),
        Pi_10=peak_count(M, 10),
        Pi_20=peak_count(M, 20),
        ACN=acn(W),
        E=E,
        R_g=radius_of_gyration(curve),
    )
