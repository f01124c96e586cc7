"""Biased Markov chains over fixed-topology lattice knots.

A chain alternates sweeps of BFACF moves (compiled kernel, topology-preserving)
with batches of pivot moves (checkpointed and rolled back when the knot type
changes). A flat-histogram bias over one geometric functional steers both move
types, and conformations are saved whenever they land in a bin that still has
quota left.
"""
from __future__ import annotations

import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._accel import jit
from .geometry import (FOUR_PI, PolygonalCurve, functional_vector, long_range_entanglement,
                       omega, writhe_matrix)
from .lattice import (PERPENDICULAR, LatticePolygon, bfacf_apply, bfacf_try, capture, draw_bfacf,
                      load_seed_polygon, make_rng, normalize_label, pivot_move, restore,
                      to_offlattice)
from .topology import verify_knot_class

log = logging.getLogger(__name__)

FUNCTIONALS = {"none": 0, "writhe": 1, "acn": 2, "entanglement": 3}
MODES = {"none": 0, "wang-landau": 1, "window": 2}
SAVE, DONE = 1, 0


@dataclass
class BiasState:
    """Flat-histogram record over one functional.

    Flatness is judged over bins the chain has ever visited, since part of a
    user-chosen range may be unreachable at a given length.
    """

    functional: str
    edges: np.ndarray
    quota: np.ndarray
    lnf: float = 1.0
    lnf_floor: float = 1e-3
    flatness: float = 0.8
    min_visits_per_bin: float = 200.0
    mode: str = "wang-landau"
    out_of_range: str = "reject"
    visits: np.ndarray = None
    total_visits: np.ndarray = None
    logw: np.ndarray = None
    saved: np.ndarray = None
    ever: np.ndarray = None
    halvings: int = 0
    converged: bool = False
    since_new: int = 0
    last_flatness: float = float("nan")

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        nb = self.nbins
        if nb < 1 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        widths = np.diff(self.edges)
        if not np.allclose(widths, widths[0]):
            raise ValueError("bins must have equal width")
        self.quota = np.broadcast_to(np.asarray(self.quota, dtype=np.int64), (nb,)).copy()
        for name, dtype in (("visits", np.int64), ("total_visits", np.int64),
                            ("logw", np.float64), ("saved", np.int64), ("ever", np.bool_)):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(nb, dtype=dtype))

    @classmethod
    def uniform(cls, functional, lo, hi, nbins, count, **kw):
        """Bins of equal width over [lo, hi] with quota ceil(count / nbins) each."""
        quota = -(-count // nbins)
        return cls(functional, np.linspace(lo, hi, nbins + 1), quota, **kw)

    @property
    def nbins(self):
        return len(self.edges) - 1

    @property
    def lo(self):
        return float(self.edges[0])

    @property
    def width(self):
        return float(self.edges[1] - self.edges[0])

    def bin_index(self, value):
        return wl_bin(value, self.lo, self.width, self.nbins, self.out_of_range == "extend")

    def histogram_flatness(self, cumulative=False):
        counts = self.total_visits if cumulative else self.visits
        seen = counts[self.ever]
        if len(seen) == 0 or seen.mean() == 0:
            return float("nan")
        return float(seen.min() / seen.mean())

    def coverage(self):
        return int(np.count_nonzero(self.saved >= self.quota)), self.nbins

    def summary(self):
        return {
            "functional": self.functional, "mode": self.mode, "lo": self.lo,
            "width": self.width, "nbins": self.nbins, "lnf": self.lnf,
            "halvings": self.halvings, "converged": self.converged,
            "last_flatness": self.last_flatness,
            "visited_bins": int(self.ever.sum()),
            "flatness": self.histogram_flatness(),
            "cumulative_flatness": self.histogram_flatness(cumulative=True),
            "visits": self.visits.tolist(), "total_visits": self.total_visits.tolist(),
            "saved": self.saved.tolist(), "quota": self.quota.tolist(),
        }


# ---------------------------------------------------------------------------
# bias kernels (shared by the python-level ops and the compiled sweep)


@jit
def wl_bin(value, lo, width, nbins, extend):
    b = int(math.floor((value - lo) / width + 1e-9))
    if b < 0 or b >= nbins:
        if not extend:
            return -1
        b = 0 if b < 0 else nbins - 1
    return b


@jit
def wl_flatness(visits, ever, min_per_bin):
    total = 0
    seen = 0
    lowest = -1
    for b in range(visits.shape[0]):
        if ever[b]:
            seen += 1
            total += visits[b]
            if lowest < 0 or visits[b] < lowest:
                lowest = visits[b]
    if seen == 0:
        return -1.0
    mean = total / seen
    if mean < min_per_bin:
        return -1.0
    return lowest / mean


@jit
def wl_visit(b, visits, total_visits, logw, ever, fs, ist):
    """Histogram update; fs = [lnf, floor, flatness, min_per_bin, last_flat],
    ist = [halvings, converged, visits since a bin was first reached].

    Once ln f reaches the floor and the histogram is flat again the weights
    freeze and ``visits`` restarts as the production histogram.
    """
    visits[b] += 1
    total_visits[b] += 1
    if ist[1] == 1:
        return
    logw[b] += fs[0]
    if ever[b]:
        ist[2] += 1
    else:
        ever[b] = True
        ist[2] = 0
    # a stage that is still discovering bins cannot be called flat
    stage = 0
    for k in range(visits.shape[0]):
        stage += visits[k]
    if 2 * ist[2] < stage or stage < fs[3] * visits.shape[0]:
        return
    ratio = wl_flatness(visits, ever, fs[3])
    if ratio >= fs[2]:
        fs[4] = ratio
        if fs[0] > fs[1]:
            fs[0] = max(fs[0] / 2.0, fs[1])
            ist[0] += 1
        else:
            ist[1] = 1
        for k in range(visits.shape[0]):
            visits[k] = 0


def accept_probability(bias, old_bin, new_bin):
    if new_bin < 0:
        return 0.0
    if old_bin < 0:
        # still walking in from outside the range: unbiased
        return 1.0
    return math.exp(min(0.0, bias.logw[old_bin] - bias.logw[new_bin]))


def _wl_arrays(bias):
    fs = np.array([bias.lnf, bias.lnf_floor, bias.flatness, bias.min_visits_per_bin,
                   bias.last_flatness])
    ist = np.array([bias.halvings, int(bias.converged), bias.since_new], dtype=np.int64)
    return fs, ist


def _wl_store(bias, fs, ist):
    bias.lnf = float(fs[0])
    bias.last_flatness = float(fs[4])
    bias.halvings = int(ist[0])
    bias.converged = bool(ist[1])
    bias.since_new = int(ist[2])


def record_visit(bias, b):
    """Add one visit to bin ``b``; halves ln f once the visited bins are flat."""
    if bias.mode != "wang-landau":
        bias.visits[b] += 1
        bias.total_visits[b] += 1
        bias.ever[b] = True
        return bias
    fs, ist = _wl_arrays(bias)
    wl_visit(b, bias.visits, bias.total_visits, bias.logw, bias.ever, fs, ist)
    _wl_store(bias, fs, ist)
    return bias


def should_save(bias, b, n, target_n, since=None, stride=0):
    if b < 0 or n != target_n or bias.saved[b] >= bias.quota[b]:
        return False
    return since is None or since >= stride


def mark_saved(bias, b):
    bias.saved[b] += 1


# ---------------------------------------------------------------------------
# functional kernels


@jit
def _seg_omega(ax, ay, az, bx, by, bz, buf, n, s):
    s2 = (s + 1) % n
    return omega(ax, ay, az, bx, by, bz, buf[s, 0], buf[s, 1], buf[s, 2],
                 buf[s2, 0], buf[s2, 1], buf[s2, 2])


@jit
def writhe_delta(buf, n, kind, site, out):
    """Change in (sum w, sum |w|) over ordered pairs for a feasible BFACF proposal."""
    k = site
    km = (k - 1 + n) % n
    kp = (k + 1) % n
    kpp = (k + 2) % n
    # added segments as endpoint rows, removed as segment indices
    added = np.empty((3, 6))
    removed = np.empty(3, dtype=np.int64)
    if kind == 0:
        na, nr = 3, 1
        removed[0] = k
        pts = ((buf[k, 0], buf[k, 1], buf[k, 2]), (out[0, 0], out[0, 1], out[0, 2]),
               (out[1, 0], out[1, 1], out[1, 2]), (buf[kp, 0], buf[kp, 1], buf[kp, 2]))
    elif kind == 1:
        na, nr = 1, 3
        removed[0] = km
        removed[1] = k
        removed[2] = kp
        pts = ((buf[km, 0], buf[km, 1], buf[km, 2]), (buf[kpp, 0], buf[kpp, 1], buf[kpp, 2]),
               (0, 0, 0), (0, 0, 0))
    else:
        na, nr = 2, 2
        removed[0] = km
        removed[1] = k
        pts = ((buf[km, 0], buf[km, 1], buf[km, 2]), (out[0, 0], out[0, 1], out[0, 2]),
               (buf[kp, 0], buf[kp, 1], buf[kp, 2]), (0, 0, 0))
    for a in range(na):
        added[a, 0] = pts[a][0]
        added[a, 1] = pts[a][1]
        added[a, 2] = pts[a][2]
        added[a, 3] = pts[a + 1][0]
        added[a, 4] = pts[a + 1][1]
        added[a, 5] = pts[a + 1][2]
    signed = 0.0
    unsigned = 0.0
    for s in range(n):
        skip = False
        for r in range(nr):
            if removed[r] == s:
                skip = True
        if skip:
            continue
        for a in range(na):
            w = _seg_omega(added[a, 0], added[a, 1], added[a, 2],
                           added[a, 3], added[a, 4], added[a, 5], buf, n, s)
            signed += w
            unsigned += abs(w)
        for r in range(nr):
            t = removed[r]
            t2 = (t + 1) % n
            w = _seg_omega(buf[t, 0], buf[t, 1], buf[t, 2], buf[t2, 0], buf[t2, 1], buf[t2, 2],
                           buf, n, s)
            signed -= w
            unsigned -= abs(w)
    for a in range(na):
        for b in range(a + 2, na):
            w = omega(added[a, 0], added[a, 1], added[a, 2], added[a, 3], added[a, 4], added[a, 5],
                      added[b, 0], added[b, 1], added[b, 2], added[b, 3], added[b, 4], added[b, 5])
            signed += w
            unsigned += abs(w)
    for a in range(nr):
        for b in range(a + 2, nr):
            t, u = removed[a], removed[b]
            t2, u2 = (t + 1) % n, (u + 1) % n
            w = omega(buf[t, 0], buf[t, 1], buf[t, 2], buf[t2, 0], buf[t2, 1], buf[t2, 2],
                      buf[u, 0], buf[u, 1], buf[u, 2], buf[u2, 0], buf[u2, 1], buf[u2, 2])
            signed -= w
            unsigned -= abs(w)
    # every unordered pair appears twice in the ordered sum
    return 2.0 * signed, 2.0 * unsigned


@jit
def entanglement_count(c, n, d_L, d_p):
    count = 0
    lim = d_L * d_L
    for i in range(n):
        for j in range(i + 1, n):
            q = j - i
            sep = min(q, n - q)
            if sep <= d_p:
                continue
            dx = c[i, 0] - c[j, 0]
            dy = c[i, 1] - c[j, 1]
            dz = c[i, 2] - c[j, 2]
            if dx * dx + dy * dy + dz * dz < lim:
                count += 1
    return count


def lattice_functional(vertices, functional, d_L=5.0, d_p=10):
    """Value of the biased functional on a lattice configuration."""
    if functional == "none":
        return 0.0
    if functional == "entanglement":
        n = len(vertices)
        return float(long_range_entanglement(vertices, d_L, d_p)) if d_p < n / 2 else 0.0
    W = writhe_matrix(vertices).entries
    if functional == "writhe":
        return float(W.sum() / FOUR_PI)
    if functional == "acn":
        return float(np.abs(W).sum() / FOUR_PI)
    raise ValueError(f"unknown functional {functional!r}")


# ---------------------------------------------------------------------------
# compiled sweep

# integer state slots
I_N, I_SINCE, I_ACCEPTED, I_PROPOSALS, I_SAVED_TOTAL, I_OOR = range(6)


@jit
def biased_sweep(buf, scratch, steps, rng, perp, ist, value_box, params, iparams,
                 visits, total_visits, logw, ever, wl_f, wl_i, saved, quota):
    """Run up to ``steps`` BFACF proposals; stop early when a save is due.

    params  = [lo, width, d_L]
    iparams = [fcode, mode, extend, nbins, target_n, max_length, stride, count, d_p]
    """
    lo, width, d_L = params[0], params[1], params[2]
    fcode, mode, extend, nbins = iparams[0], iparams[1], iparams[2], iparams[3]
    target_n, max_length, stride, count, d_p = (iparams[4], iparams[5], iparams[6],
                                                 iparams[7], iparams[8])
    out = np.zeros((2, 3), dtype=np.int64)
    n = ist[I_N]
    value = value_box[0]
    cur = 0 if mode == 0 else wl_bin(value, lo, width, nbins, extend == 1)
    for _ in range(steps):
        kind, site, d = draw_bfacf(rng, n)
        u = rng.random()
        ist[I_PROPOSALS] += 1
        if bfacf_try(buf, n, kind, site, d, max_length, perp, out):
            accept = True
            new_value = value
            nb = cur
            if mode != 0:
                if fcode == 1 or fcode == 2:
                    ds, du = writhe_delta(buf, n, kind, site, out)
                    new_value = value + (ds if fcode == 1 else du) / (4.0 * math.pi)
                else:
                    for r in range(n):
                        for c in range(3):
                            scratch[r, c] = buf[r, c]
                    m = bfacf_apply(scratch, n, kind, site, out)
                    new_value = float(entanglement_count(scratch, m, d_L, d_p)) if d_p < m / 2 else 0.0
                nb = wl_bin(new_value, lo, width, nbins, extend == 1)
                if cur < 0:
                    pass
                elif nb < 0:
                    accept = False
                    ist[I_OOR] += 1
                elif mode == 1 and u >= math.exp(min(0.0, logw[cur] - logw[nb])):
                    accept = False
            if accept:
                n = bfacf_apply(buf, n, kind, site, out)
                value = new_value
                cur = nb
                ist[I_SINCE] += 1
                ist[I_ACCEPTED] += 1
        if cur < 0:
            continue
        if mode == 1:
            wl_visit(cur, visits, total_visits, logw, ever, wl_f, wl_i)
        elif mode == 2:
            visits[cur] += 1
            total_visits[cur] += 1
            ever[cur] = True
        if (n == target_n and saved[cur] < quota[cur] and ist[I_SINCE] >= stride
                and ist[I_SAVED_TOTAL] < count):
            ist[I_N] = n
            value_box[0] = value
            return SAVE
    ist[I_N] = n
    value_box[0] = value
    return DONE


# ---------------------------------------------------------------------------
# chains


@dataclass
class BiasSpec:
    functional: str = "writhe"
    lo: float = -10.0
    hi: float = 10.0
    nbins: int = 40
    mode: str = "wang-landau"

    def __post_init__(self):
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"unknown bias functional {self.functional!r}")
        if self.functional == "none":
            self.mode = "none"
        if self.mode not in MODES:
            raise ValueError(f"unknown bias mode {self.mode!r}")
        if self.mode != "none" and not self.hi > self.lo:
            raise ValueError("bias range must have hi > lo")


@dataclass
class ChainConfig:
    knot: str = "0_1"
    target_n: int = 100
    count: int = 100
    bias: BiasSpec = field(default_factory=BiasSpec)
    seed: int = 0
    chain_id: int = 0
    pivot_batch: int = 10
    bfacf_per_batch: int = 100
    max_moves: int = 10_000_000
    jitter: float = 0.1
    out_of_range: str = "reject"
    stride: int = None
    max_length: int = None
    lnf0: float = 1.0
    lnf_floor: float = 1e-3
    flatness: float = 0.8
    audit_every: int = 1000
    d_L: float = 5.0
    d_p: int = 10
    progress_every: float = 0.0

    def __post_init__(self):
        self.knot = normalize_label(self.knot)
        if isinstance(self.bias, dict):
            self.bias = BiasSpec(**self.bias)
        if self.target_n < 4 or self.target_n % 2:
            raise ValueError("target_n must be an even number >= 4")
        seed_len = load_seed_polygon(self.knot, verify=False).length
        if self.target_n < seed_len:
            raise ValueError(f"target_n must be >= {seed_len}, the {self.knot} seed length")
        for name in ("count", "bfacf_per_batch", "max_moves"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.pivot_batch < 0:
            raise ValueError("pivot_batch must be >= 0 (0 disables pivots)")
        if self.out_of_range not in ("reject", "extend"):
            raise ValueError("out_of_range must be 'reject' or 'extend'")
        if self.stride is None:
            self.stride = 5 * self.target_n
        if self.max_length is None:
            self.max_length = self.target_n
        if self.max_length < self.target_n:
            raise ValueError("max_length must be at least target_n")

    def make_bias(self):
        b = self.bias
        if b.mode == "none":
            return BiasState("none", [0.0, 1.0], self.count, mode="none")
        return BiasState.uniform(b.functional, b.lo, b.hi, b.nbins, self.count, lnf=self.lnf0,
                                 lnf_floor=self.lnf_floor, flatness=self.flatness,
                                 mode=b.mode, out_of_range=self.out_of_range)

    def as_dict(self):
        return asdict(self)


@dataclass
class Record:
    id: int
    label: str
    coords: np.ndarray
    functionals: object
    seed: int
    chain_id: int
    move_index: int
    bin: int


@dataclass
class DatasetShard:
    records: list
    config: ChainConfig
    bias: dict
    stats: dict
    status: str = "complete"

    def __len__(self):
        return len(self.records)


class ChainState:
    """Mutable state of one chain: polygon buffer, RNG, bias and counters."""

    def __init__(self, config, polygon=None):
        self.config = config
        self.rng = make_rng(config.seed, config.chain_id)
        poly = polygon if polygon is not None else load_seed_polygon(config.knot)
        if poly.length > config.max_length:
            raise ValueError("seed polygon longer than max_length")
        self.buf = np.zeros((config.max_length + 2, 3), dtype=np.int64)
        self.scratch = np.zeros_like(self.buf)
        self.buf[:poly.length] = poly.vertices
        self.bias = config.make_bias()
        self.ist = np.zeros(6, dtype=np.int64)
        self.ist[I_N] = poly.length
        self.value = np.zeros(1)
        self.batches = 0
        self.moves = 0
        self.bfacf_since_audit = 0
        self.stats = {"pivot_batches": 0, "pivot_rollbacks": 0, "pivot_bias_rejects": 0,
                      "pivot_accepted": 0, "audits": 0}
        self.resync()

    @property
    def n(self):
        return int(self.ist[I_N])

    @property
    def polygon(self):
        return LatticePolygon._trusted(self.buf[:self.n].copy())

    def set_polygon(self, poly):
        self.buf[:poly.length] = poly.vertices
        self.ist[I_N] = poly.length

    @property
    def current_bin(self):
        if self.bias.mode == "none":
            return 0
        return self.bias.bin_index(self.value[0])

    def resync(self):
        c = self.config
        self.value[0] = lattice_functional(self.buf[:self.n], c.bias.functional, c.d_L, c.d_p)

    def _params(self):
        c, b = self.config, self.bias
        params = np.array([b.lo, b.width, c.d_L])
        iparams = np.array([FUNCTIONALS[c.bias.functional], MODES[b.mode],
                            int(b.out_of_range == "extend"), b.nbins, c.target_n, c.max_length,
                            c.stride, c.count, c.d_p], dtype=np.int64)
        return params, iparams

    def bfacf_sweep(self, steps):
        """Compiled BFACF sweep; returns SAVE or DONE and the proposals used."""
        b = self.bias
        params, iparams = self._params()
        fs, wi = _wl_arrays(b)
        before = int(self.ist[I_PROPOSALS])
        status = biased_sweep(self.buf, self.scratch, steps, self.rng, PERPENDICULAR, self.ist,
                              self.value, params, iparams, b.visits, b.total_visits, b.logw,
                              b.ever, fs, wi, b.saved, b.quota)
        _wl_store(b, fs, wi)
        used = int(self.ist[I_PROPOSALS]) - before
        self.moves += used
        self.bfacf_since_audit += used
        return status, used

    def pivot_batch(self):
        """Checkpointed batch of pivots; rolled back on a knot-type change or bias rejection."""
        c = self.config
        batch_rng = make_rng(c.seed, c.chain_id, 1, self.batches)
        self.batches += 1
        self.stats["pivot_batches"] += 1
        poly = self.polygon
        checkpoint = capture(poly, self.rng)
        accepted = 0
        for _ in range(c.pivot_batch):
            if pivot_move(poly, batch_rng).accepted:
                accepted += 1
        self.moves += c.pivot_batch
        if accepted and not np.array_equal(poly.vertices, checkpoint.vertices):
            result = verify_knot_class(poly, c.knot, with_writhe=False)
            if result.verdict != c.knot:
                self.rollback(checkpoint)
                self.stats["pivot_rollbacks"] += 1
            else:
                old_bin = self.current_bin
                new_value = lattice_functional(poly.vertices, c.bias.functional, c.d_L, c.d_p)
                new_bin = 0 if self.bias.mode == "none" else self.bias.bin_index(new_value)
                p = 1.0
                if self.bias.mode != "none":
                    p = accept_probability(self.bias, old_bin, new_bin)
                    if self.bias.mode == "window" and new_bin >= 0:
                        p = 1.0
                    elif old_bin < 0:
                        p = 1.0
                if batch_rng.random() < p:
                    self.set_polygon(poly)
                    self.value[0] = new_value
                    self.ist[I_SINCE] += accepted
                    self.stats["pivot_accepted"] += accepted
                else:
                    self.rollback(checkpoint)
                    self.stats["pivot_bias_rejects"] += 1
        if self.bias.mode != "none" and self.current_bin >= 0:
            record_visit(self.bias, self.current_bin)

    def rollback(self, checkpoint):
        poly, self.rng = restore(checkpoint)
        self.set_polygon(poly)

    def audit(self):
        result = verify_knot_class(self.polygon, self.config.knot, with_writhe=False)
        self.stats["audits"] += 1
        self.bfacf_since_audit = 0
        if result.verdict != self.config.knot:
            raise RuntimeError(f"BFACF changed the knot type (det={result.determinant}, "
                               f"v2={result.v2_exact})")


def mc_step(state):
    """One BFACF sweep followed by one pivot batch (or an early stop for a save)."""
    status, used = state.bfacf_sweep(state.config.bfacf_per_batch)
    if state.bfacf_since_audit >= state.config.audit_every:
        state.audit()
    if status == SAVE:
        return status
    if state.config.pivot_batch:
        state.pivot_batch()
    return DONE


def _save(state, records):
    c = state.config
    poly = state.polygon
    b = state.current_bin
    result = verify_knot_class(poly, c.knot, with_writhe=False)
    if result.verdict != c.knot:
        raise RuntimeError("saved configuration failed topology verification")
    rid = len(records)
    for attempt in range(16):
        curve = to_offlattice(poly, c.jitter, seed=_jitter_seed(c, rid, attempt))
        coords = np.array([[float(f"{x:.12g}") for x in row] for row in curve.vertices])
        if c.jitter < 0.5 / math.sqrt(3.0) or verify_knot_class(
                coords, c.knot, with_writhe=False).verdict == c.knot:
            break
    else:  # pragma: no cover - only reachable for amplitudes near 0.5
        raise RuntimeError("could not jitter configuration without changing its knot type")
    fv = functional_vector(PolygonalCurve(coords), d_L=c.d_L, d_p=c.d_p)
    records.append(Record(rid, c.knot, coords, fv, c.seed, c.chain_id, state.moves, b))
    mark_saved(state.bias, b)
    state.ist[I_SAVED_TOTAL] += 1
    state.ist[I_SINCE] = 0


def _jitter_seed(config, record_id, attempt):
    return np.random.SeedSequence([config.seed, config.chain_id, 2, record_id, attempt])


def progress_line(state):
    filled, total = state.bias.coverage()
    return (f"chain={state.config.chain_id} moves={state.moves} "
            f"bins_filled={filled}/{total} lnf={state.bias.lnf:.6g}")


def run_chain(config, stream=None):
    """Run one chain until ``config.count`` saves or the move budget is spent."""
    state = ChainState(config)
    records = []
    last_report = time.monotonic()
    while state.ist[I_SAVED_TOTAL] < config.count and state.moves < config.max_moves:
        status = mc_step(state)
        if status == SAVE:
            _save(state, records)
        if config.progress_every and time.monotonic() - last_report > config.progress_every:
            print(progress_line(state), file=stream or sys.stderr, flush=True)
            last_report = time.monotonic()
    status = "complete" if len(records) >= config.count else "budget-exhausted"
    if status != "complete":
        log.warning("chain %d exhausted its move budget with %d/%d saves",
                    config.chain_id, len(records), config.count)
    stats = dict(state.stats, moves=state.moves, proposals=int(state.ist[I_PROPOSALS]),
                 accepted_bfacf=int(state.ist[I_ACCEPTED]),
                 out_of_range=int(state.ist[I_OOR]))
    if stream is not None or config.progress_every:
        print(progress_line(state), file=stream or sys.stderr, flush=True)
    return DatasetShard(records, config, state.bias.summary(), stats, status)


def run_chains(configs, workers=1):
    """Run independent chains, optionally in worker processes; order follows ``configs``."""
    if workers <= 1:
        return [run_chain(c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_chain, configs))


@dataclass
class Dataset:
    records: list
    coverage: dict
    class_counts: dict
    status: str = "complete"

    def __len__(self):
        return len(self.records)


def merge_shards(*shards):
    """Concatenate shards (same target length) with fresh sequential ids."""
    if len(shards) == 1 and isinstance(shards[0], (list, tuple)):
        shards = tuple(shards[0])
    if not shards:
        raise ValueError("nothing to merge")
    n0 = shards[0].config.target_n
    specs = {}
    for s in shards:
        if s.config.target_n != n0:
            raise ValueError("shards have different target lengths")
        # one bias functional per class may appear with a single binning only
        key = (s.config.knot, s.config.bias.functional)
        if specs.setdefault(key, s.config.bias) != s.config.bias:
            raise ValueError(f"conflicting bins for {key[1]} bias on {key[0]}")
    records = []
    coverage = {}
    counts = {}
    for s in shards:
        key = (s.config.knot, s.config.bias.functional, s.config.chain_id)
        coverage[key] = list(s.bias.get("saved", []))
        for r in s.records:
            records.append(Record(len(records), r.label, r.coords, r.functionals, r.seed,
                                  r.chain_id, r.move_index, r.bin))
            counts[r.label] = counts.get(r.label, 0) + 1
    status = "complete" if all(s.status == "complete" for s in shards) else "budget-exhausted"
    return Dataset(records, coverage, counts, status)
