"""Self-avoiding polygons on the cubic lattice and their Monte Carlo moves.

The BFACF move set (grow, shrink, corner flip) keeps the knot type fixed; the
two-point pivot does not, so callers that use it must re-verify topology. Move
kernels operate on an ``(capacity, 3)`` int64 buffer plus a live length so the
sampler can run long sweeps without reallocating.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from itertools import permutations, product

import numpy as np
from scipy.spatial import cKDTree

from ._accel import jit

GROW, SHRINK, FLIP = 0, 1, 2
KIND_NAMES = {GROW: "bfacf-grow", SHRINK: "bfacf-shrink", FLIP: "bfacf-flip"}
# grow / shrink / flip proposal weights
PROPOSAL_CDF = (0.25, 0.5, 1.0)

SEED_LABELS = {"0_1": "0_1", "0₁": "0_1", "3_1": "3_1", "3₁": "3_1"}

# Unit vectors perpendicular to each axis, in a fixed order used by ``direction``.
PERPENDICULAR = np.array(
    [
        [[0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
        [[1, 0, 0], [-1, 0, 0], [0, 0, 1], [0, 0, -1]],
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]],
    ],
    dtype=np.int64,
)


def _point_group():
    mats = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            mats.append(m)
    # identity first so index 0 is always the trivial element
    mats.sort(key=lambda m: (not np.array_equal(m, np.eye(3, dtype=np.int64)),))
    return np.array(mats)


POINT_GROUP = _point_group()


class LatticeError(ValueError):
    pass


def _lattice_problems(v):
    n = len(v)
    if v.ndim != 2 or v.shape[1] != 3:
        return "vertices must be an (N, 3) array"
    if n < 4 or n % 2:
        return f"length {n} is not an even number >= 4"
    steps = np.abs(np.roll(v, -1, axis=0) - v).sum(axis=1)
    if not np.all(steps == 1):
        return "consecutive vertices are not unit lattice steps"
    if not _distinct(v):
        return "polygon is not self-avoiding"
    return None


def _keys(v):
    v = np.asarray(v, dtype=np.int64)
    off = v - v.min(axis=0)
    span = off.max(axis=0) + 1
    return (off[:, 0] * span[1] + off[:, 1]) * span[2] + off[:, 2]


def _distinct(v):
    keys = _keys(v).tolist()
    return len(set(keys)) == len(keys)


@dataclass
class LatticePolygon:
    """Closed self-avoiding unit-step polygon in Z^3."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=np.int64).reshape(-1, 3)
        problem = _lattice_problems(self.vertices)
        if problem:
            raise LatticeError(problem)

    @property
    def length(self):
        return len(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        if not isinstance(other, LatticePolygon):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    def copy(self):
        return LatticePolygon._trusted(self.vertices.copy())

    def mirror(self):
        return LatticePolygon._trusted(self.vertices * np.array([1, 1, -1]))

    @classmethod
    def _trusted(cls, vertices):
        obj = cls.__new__(cls)
        obj.vertices = vertices
        return obj


@dataclass
class PolygonalCurve:
    """Closed polygon in R^3; the segment from the last vertex back to the first is implied."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        if len(v) < 3:
            raise ValueError("a closed curve needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite coordinates")
        if cKDTree(v).query_pairs(1e-9):
            raise ValueError("two vertices coincide")
        self.vertices = v

    def __len__(self):
        return len(self.vertices)

    @classmethod
    def from_lattice(cls, poly):
        return cls(poly.vertices.astype(np.float64))

    def scaled(self, c):
        return PolygonalCurve(self.vertices * c)

    def mirror(self):
        return PolygonalCurve(self.vertices * np.array([1.0, 1.0, -1.0]))


@dataclass(frozen=True)
class MoveOutcome:
    accepted: bool
    kind: str
    delta_length: int = 0


@dataclass
class Checkpoint:
    vertices: np.ndarray
    rng_class: type
    rng_state: dict = field(repr=False)


def make_rng(seed, chain_id=0, *extra):
    """Counter-based Philox stream keyed by ``(seed, chain_id, *extra)``."""
    ss = np.random.SeedSequence([int(seed), int(chain_id), *map(int, extra)])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# seeds


def read_seed_file(path_or_text):
    text = path_or_text
    if not isinstance(text, str) or "\n" not in text:
        with open(path_or_text) as fh:
            text = fh.read()
    lines = text.splitlines()
    try:
        n = int(lines[0])
        rows = [tuple(int(x) for x in line.split()) for line in lines[1:] if line.strip()]
    except (ValueError, IndexError) as exc:
        raise LatticeError(f"corrupt seed file: {exc}") from None
    if len(rows) != n or any(len(r) != 3 for r in rows):
        raise LatticeError(f"corrupt seed file: expected {n} rows of 3 integers")
    return LatticePolygon(np.array(rows, dtype=np.int64))


def write_seed_file(poly, path):
    with open(path, "w") as fh:
        fh.write(f"{poly.length}\n")
        for x, y, z in poly.vertices.tolist():
            fh.write(f"{x} {y} {z}\n")


def normalize_label(label):
    try:
        return SEED_LABELS[label]
    except KeyError:
        raise LatticeError(f"unsupported knot class {label!r}") from None


def load_seed_polygon(knot_class, verify=True):
    """Shipped seed polygon for ``knot_class``, re-verified on load."""
    label = normalize_label(knot_class)
    try:
        text = resources.files("geoknot.seeds").joinpath(f"{label}.txt").read_text()
    except FileNotFoundError:
        raise LatticeError(f"missing seed file for {label}") from None
    poly = read_seed_file(text)
    if verify:
        from .topology import verify_knot_class

        result = verify_knot_class(poly, label)
        if result.verdict != label:
            raise LatticeError(f"seed for {label} verifies as {result.verdict}")
    return poly


def check_self_avoiding(poly):
    v = poly.vertices if isinstance(poly, LatticePolygon) else np.asarray(poly)
    return _distinct(v)


# ---------------------------------------------------------------------------
# kernels


@jit
def occupied(buf, n, x, y, z):
    for i in range(n):
        if buf[i, 0] == x and buf[i, 1] == y and buf[i, 2] == z:
            return True
    return False


@jit
def edge_axis(dx, dy, dz):
    if dx != 0:
        return 0
    if dy != 0:
        return 1
    return 2


@jit
def bfacf_try(buf, n, kind, site, dir_idx, max_length, perp, out):
    """Feasibility of one BFACF proposal; new vertex positions go to ``out``.

    grow and shrink act on edge ``site -> site+1``, flip on vertex ``site``.
    """
    k = site
    kp = (k + 1) % n
    if kind == 0:
        if n + 2 > max_length:
            return False
        ax = edge_axis(buf[kp, 0] - buf[k, 0], buf[kp, 1] - buf[k, 1], buf[kp, 2] - buf[k, 2])
        ux = perp[ax, dir_idx, 0]
        uy = perp[ax, dir_idx, 1]
        uz = perp[ax, dir_idx, 2]
        out[0, 0] = buf[k, 0] + ux
        out[0, 1] = buf[k, 1] + uy
        out[0, 2] = buf[k, 2] + uz
        out[1, 0] = buf[kp, 0] + ux
        out[1, 1] = buf[kp, 1] + uy
        out[1, 2] = buf[kp, 2] + uz
        if occupied(buf, n, out[0, 0], out[0, 1], out[0, 2]):
            return False
        if occupied(buf, n, out[1, 0], out[1, 1], out[1, 2]):
            return False
        return True
    km = (k - 1 + n) % n
    if kind == 1:
        if n - 2 < 4:
            return False
        kpp = (k + 2) % n
        ux = buf[km, 0] - buf[k, 0]
        uy = buf[km, 1] - buf[k, 1]
        uz = buf[km, 2] - buf[k, 2]
        ex = buf[kp, 0] - buf[k, 0]
        ey = buf[kp, 1] - buf[k, 1]
        ez = buf[kp, 2] - buf[k, 2]
        if ux * ex + uy * ey + uz * ez != 0:
            return False
        if (buf[kpp, 0] - buf[kp, 0] != ux or buf[kpp, 1] - buf[kp, 1] != uy
                or buf[kpp, 2] - buf[kp, 2] != uz):
            return False
        return True
    ax_ = buf[k, 0] - buf[km, 0]
    ay_ = buf[k, 1] - buf[km, 1]
    az_ = buf[k, 2] - buf[km, 2]
    bx = buf[kp, 0] - buf[k, 0]
    by = buf[kp, 1] - buf[k, 1]
    bz = buf[kp, 2] - buf[k, 2]
    if ax_ * bx + ay_ * by + az_ * bz != 0:
        return False
    out[0, 0] = buf[km, 0] + bx
    out[0, 1] = buf[km, 1] + by
    out[0, 2] = buf[km, 2] + bz
    return not occupied(buf, n, out[0, 0], out[0, 1], out[0, 2])


@jit
def bfacf_apply(buf, n, kind, site, out):
    """Commit a feasible proposal from :func:`bfacf_try`; returns the new length."""
    k = site
    if kind == 0:
        for i in range(n - 1, k, -1):
            buf[i + 2, 0] = buf[i, 0]
            buf[i + 2, 1] = buf[i, 1]
            buf[i + 2, 2] = buf[i, 2]
        for c in range(3):
            buf[k + 1, c] = out[0, c]
            buf[k + 2, c] = out[1, c]
        return n + 2
    if kind == 1:
        if k + 1 < n:
            for i in range(k + 2, n):
                buf[i - 2, 0] = buf[i, 0]
                buf[i - 2, 1] = buf[i, 1]
                buf[i - 2, 2] = buf[i, 2]
        else:
            for i in range(1, n - 1):
                buf[i - 1, 0] = buf[i, 0]
                buf[i - 1, 1] = buf[i, 1]
                buf[i - 1, 2] = buf[i, 2]
        return n - 2
    for c in range(3):
        buf[k, c] = out[0, c]
    return n


@jit
def draw_bfacf(rng, n):
    u = rng.random()
    kind = 0 if u < 0.25 else (1 if u < 0.5 else 2)
    site = int(rng.random() * n)
    dir_idx = int(rng.random() * 4)
    return kind, site, dir_idx


@jit
def pivot_arc(n, i, j):
    """(start, arc length) of the longer arc between vertices i and j."""
    l1 = (j - i) % n
    if l1 >= n - l1:
        return i, l1
    return j, n - l1


@jit
def pivot_try(buf, n, i, j, rot, swap, out):
    """Transform the longer arc between i and j; candidate interior goes to ``out``.

    ``rot`` fixes ``q - p`` (or negates it when ``swap``, in which case the
    arc is also traversed backwards so its endpoints stay in place).
    """
    start, length = pivot_arc(n, i, j)
    end = (start + length) % n
    px, py, pz = buf[start, 0], buf[start, 1], buf[start, 2]
    qx, qy, qz = buf[end, 0], buf[end, 1], buf[end, 2]
    for m in range(1, length):
        if swap:
            src = (start + length - m) % n
            dx, dy, dz = buf[src, 0] - qx, buf[src, 1] - qy, buf[src, 2] - qz
        else:
            src = (start + m) % n
            dx, dy, dz = buf[src, 0] - px, buf[src, 1] - py, buf[src, 2] - pz
        out[m, 0] = px + rot[0, 0] * dx + rot[0, 1] * dy + rot[0, 2] * dz
        out[m, 1] = py + rot[1, 0] * dx + rot[1, 1] * dy + rot[1, 2] * dz
        out[m, 2] = pz + rot[2, 0] * dx + rot[2, 1] * dy + rot[2, 2] * dz
    # transformed interior against the untouched remainder (endpoints included)
    for m in range(1, length):
        for r in range(0, n - length + 1):
            idx = (end + r) % n
            if out[m, 0] == buf[idx, 0] and out[m, 1] == buf[idx, 1] and out[m, 2] == buf[idx, 2]:
                return False
    return True


@jit
def pivot_apply(buf, n, i, j, out):
    start, length = pivot_arc(n, i, j)
    for m in range(1, length):
        idx = (start + m) % n
        for c in range(3):
            buf[idx, c] = out[m, c]


def pivot_elements(v):
    """Indices into POINT_GROUP that fix ``v`` and those that negate it."""
    v = np.asarray(v, dtype=np.int64)
    images = POINT_GROUP @ v
    fix = np.flatnonzero((images == v).all(axis=1))
    swap = np.flatnonzero((images == -v).all(axis=1))
    return fix, swap


# ---------------------------------------------------------------------------
# public moves


def _direction_index(edge, direction):
    ax = int(np.flatnonzero(edge)[0])
    for idx, u in enumerate(PERPENDICULAR[ax]):
        if np.array_equal(u, direction):
            return idx
    raise ValueError(f"direction {direction} is not a unit vector perpendicular to the edge")


_KIND_CODES = {"grow": GROW, "shrink": SHRINK, "flip": FLIP,
               "bfacf-grow": GROW, "bfacf-shrink": SHRINK, "bfacf-flip": FLIP}


def bfacf_move(poly, rng, max_length=None, kind=None, site=None, direction=None):
    """One BFACF proposal on ``poly`` (in place).

    Three uniforms are always drawn (kind, site, perpendicular direction);
    ``kind``, ``site`` and ``direction`` override the drawn values, which is
    how tests force a particular move.
    """
    n = poly.length
    if max_length is None:
        max_length = n + 2
    if max_length < n:
        raise ValueError("max_length below current length")
    k, s, d = draw_bfacf(rng, n)
    if kind is not None:
        k = _KIND_CODES[kind]
    if site is not None:
        s = int(site) % n
    if direction is not None:
        edge = poly.vertices[(s + 1) % n] - poly.vertices[s]
        d = _direction_index(edge, np.asarray(direction))
    buf = np.empty((n + 2, 3), dtype=np.int64)
    buf[:n] = poly.vertices
    out = np.zeros((2, 3), dtype=np.int64)
    name = KIND_NAMES[k]
    if not bfacf_try(buf, n, k, s, d, max_length, PERPENDICULAR, out):
        return MoveOutcome(False, name, 0)
    new_n = bfacf_apply(buf, n, k, s, out)
    poly.vertices = buf[:new_n].copy()
    return MoveOutcome(True, name, new_n - n)


def pivot_move(poly, rng, i=None, j=None, element=None):
    """Two-point lattice pivot (in place). May change the knot type.

    ``element`` indexes the combined list of point-group elements valid for
    the chosen pair (those fixing both endpoints, then those swapping them).
    """
    n = poly.length
    if n < 6 and (i is None or j is None):
        return MoveOutcome(False, "pivot", 0)
    ui, uj, ue = rng.random(), rng.random(), rng.random()
    if i is None:
        i = int(ui * n)
    if j is None:
        j = int(uj * (n - 1))
        if j >= i:
            j += 1
    i, j = int(i) % n, int(j) % n
    if i == j:
        raise ValueError("pivot needs two distinct vertices")
    start, length = pivot_arc(n, i, j)
    v = poly.vertices[(start + length) % n] - poly.vertices[start]
    fix, swap = pivot_elements(v)
    n_el = len(fix) + len(swap)
    if element is None:
        element = int(ue * n_el)
    if element == 0 and len(fix) and fix[0] == 0:
        return MoveOutcome(True, "pivot", 0)
    if element < len(fix):
        rot, flag = POINT_GROUP[fix[element]], False
    else:
        rot, flag = POINT_GROUP[swap[element - len(fix)]], True
    buf = poly.vertices
    out = np.zeros((n, 3), dtype=np.int64)
    if not pivot_try(buf, n, i, j, rot, flag, out):
        return MoveOutcome(False, "pivot", 0)
    new = buf.copy()
    pivot_apply(new, n, i, j, out)
    poly.vertices = new
    return MoveOutcome(True, "pivot", 0)


# ---------------------------------------------------------------------------
# checkpoints and export


def capture(poly, rng):
    bg = rng.bit_generator
    return Checkpoint(poly.vertices.copy(), type(bg), copy.deepcopy(bg.state))


def restore(checkpoint):
    bg = checkpoint.rng_class()
    bg.state = copy.deepcopy(checkpoint.rng_state)
    return LatticePolygon._trusted(checkpoint.vertices.copy()), np.random.Generator(bg)


def to_offlattice(poly, amplitude, seed):
    """Jitter every vertex by an independent uniform vector in [-a, a]^3."""
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-amplitude, amplitude, size=poly.vertices.shape)
    return PolygonalCurve(poly.vertices + shift)
