import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_lattice_polygon
from oracles import brute_self_avoiding
from geoknot.lattice import (POINT_GROUP, LatticeError, LatticePolygon, bfacf_move, capture,
                             check_self_avoiding, load_seed_polygon, make_rng, pivot_elements,
                             pivot_move, read_seed_file, restore, to_offlattice, write_seed_file)
from geoknot.topology import knot_determinant, project_to_diagram

SQUARE = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]


def square():
    return LatticePolygon(SQUARE)


class TestPolygonType:
    def test_valid_square(self):
        assert square().length == 4

    @pytest.mark.parametrize("verts", [
        [(0, 0, 0), (1, 0, 0), (1, 1, 0)],                        # odd length
        [(0, 0, 0), (2, 0, 0), (2, 1, 0), (0, 1, 0)],             # long step
        [(0, 0, 0), (1, 0, 0), (0, 0, 0), (1, 0, 0)],             # revisits
    ])
    def test_rejects_invalid(self, verts):
        with pytest.raises(LatticeError):
            LatticePolygon(verts)

    def test_mirror_is_valid(self):
        p = load_seed_polygon("3_1").mirror()
        assert LatticePolygon(p.vertices) == p


class TestSeeds:
    def test_unknot_seed_is_square(self):
        assert np.array_equal(load_seed_polygon("0_1").vertices, SQUARE)

    def test_trefoil_seed(self):
        p = load_seed_polygon("3₁")
        assert p.length == 24
        assert knot_determinant(project_to_diagram(p.vertices, (0.3, 0.2, 1.0))) == 3

    def test_unknown_label(self):
        with pytest.raises(LatticeError):
            load_seed_polygon("5₂")

    def test_seed_file_round_trip(self, tmp_path):
        p = load_seed_polygon("3_1")
        write_seed_file(p, tmp_path / "s.txt")
        assert read_seed_file(tmp_path / "s.txt") == p

    def test_corrupt_seed_file(self, tmp_path):
        (tmp_path / "bad.txt").write_text("4\n0 0 0\n1 0 0\n")
        with pytest.raises(LatticeError):
            read_seed_file(tmp_path / "bad.txt")


class TestSelfAvoidance:
    def test_square(self):
        assert check_self_avoiding(square())

    def test_repeated_vertex(self):
        assert not check_self_avoiding(np.array(SQUARE + [(0, 0, 0)]))

    def test_trefoil_matches_brute_force(self):
        v = load_seed_polygon("3_1").vertices
        assert check_self_avoiding(v) == brute_self_avoiding(v) is True


class TestBFACF:
    def test_forced_grow(self):
        p = square()
        out = bfacf_move(p, make_rng(0), max_length=6, kind="grow", site=0, direction=(0, 0, 1))
        assert out.accepted and out.kind == "bfacf-grow" and out.delta_length == 2
        expected = [(0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
        assert np.array_equal(p.vertices, expected)

    def test_forced_shrink_on_square_rejected(self):
        p = square()
        out = bfacf_move(p, make_rng(0), kind="shrink", site=0)
        assert not out.accepted and p == square()

    def test_grow_then_shrink_restores(self):
        p = square()
        bfacf_move(p, make_rng(0), max_length=6, kind="grow", site=0, direction=(0, 0, 1))
        out = bfacf_move(p, make_rng(0), kind="shrink", site=1)
        assert out.accepted and out.delta_length == -2 and p == square()

    def test_flip_keeps_length(self):
        p = load_seed_polygon("3_1")
        rng = make_rng(1)
        for _ in range(200):
            out = bfacf_move(p, rng, kind="flip")
            assert out.delta_length == 0
        assert p.length == 24

    def test_max_length_respected(self):
        p = square()
        rng = make_rng(2)
        for _ in range(500):
            bfacf_move(p, rng, max_length=10)
            assert p.length <= 10

    def test_max_length_below_current(self):
        with pytest.raises(ValueError):
            bfacf_move(load_seed_polygon("3_1"), make_rng(0), max_length=20)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), knot=st.sampled_from(["0_1", "3_1"]))
    def test_moves_keep_invariants(self, seed, knot):
        p = load_seed_polygon(knot)
        det0 = knot_determinant(project_to_diagram(p.vertices, (0.31, 0.17, 1.0)))
        rng = make_rng(seed)
        for _ in range(300):
            before = p.length
            out = bfacf_move(p, rng, max_length=40)
            if out.accepted:
                assert p.length - before == out.delta_length
                assert out.delta_length in {"bfacf-grow": (2,), "bfacf-shrink": (-2,),
                                            "bfacf-flip": (0,)}[out.kind]
            LatticePolygon(p.vertices)   # closure, self-avoidance, parity
        assert knot_determinant(project_to_diagram(p.vertices, (0.31, 0.17, 1.0))) == det0


class TestPivot:
    def test_identity_element(self):
        p = load_seed_polygon("3_1")
        q = p.copy()
        out = pivot_move(p, make_rng(0), i=0, j=12, element=0)
        assert out.accepted and p == q

    def test_square_diagonal_half_turn_rejected(self):
        p = square()
        half_turn = np.array([[0, 1, 0], [1, 0, 0], [0, 0, -1]])
        fix, _ = pivot_elements((1, 1, 0))
        element = [k for k, g in enumerate(fix) if np.array_equal(POINT_GROUP[g], half_turn)][0]
        out = pivot_move(p, make_rng(0), i=0, j=2, element=element)
        assert not out.accepted and p == square()

    def test_group_elements(self):
        assert len(POINT_GROUP) == 48
        assert np.array_equal(POINT_GROUP[0], np.eye(3))
        fix, swap = pivot_elements((1, 1, 0))
        assert all(np.array_equal(POINT_GROUP[g] @ (1, 1, 0), (1, 1, 0)) for g in fix)
        assert all(np.array_equal(POINT_GROUP[g] @ (1, 1, 0), (-1, -1, 0)) for g in swap)

    def test_acceptance_rate_positive(self):
        p = random_lattice_polygon(5, 100, pivots=0)
        rng = make_rng(3)
        accepted = 0
        for _ in range(10_000):
            accepted += pivot_move(p, rng).accepted
            assert p.length == 100
        LatticePolygon(p.vertices)
        assert 0 < accepted / 10_000 < 1

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_pivot_keeps_polygon_valid(self, seed):
        p = random_lattice_polygon(seed % 50, 30, pivots=0)
        rng = make_rng(seed)
        for _ in range(50):
            pivot_move(p, rng)
        assert LatticePolygon(p.vertices).length == 30


class TestCheckpoint:
    def test_round_trip(self):
        p = load_seed_polygon("3_1")
        rng = make_rng(7)
        ck = capture(p, rng)
        for _ in range(50):
            bfacf_move(p, rng, max_length=60)
        q, rng2 = restore(ck)
        assert q == load_seed_polygon("3_1")
        assert np.array_equal(rng2.random(8), make_rng(7).random(8))

    def test_trajectories_match(self):
        p = load_seed_polygon("3_1")
        rng = make_rng(8)
        for _ in range(20):
            bfacf_move(p, rng, max_length=60)
        ck = capture(p, rng)
        runs = []
        for _ in range(2):
            q, r = restore(ck)
            for _ in range(100):
                bfacf_move(q, r, max_length=60)
                pivot_move(q, r)
            runs.append(q.vertices.copy())
        assert np.array_equal(*runs)

    def test_restore_different_length(self):
        ck = capture(square(), make_rng(0))
        p, _ = restore(ck)
        assert p.length == 4


class TestOffLattice:
    def test_zero_amplitude(self):
        p = load_seed_polygon("3_1")
        assert np.array_equal(to_offlattice(p, 0.0, 1).vertices, p.vertices)

    def test_deterministic(self):
        p = load_seed_polygon("3_1")
        assert np.array_equal(to_offlattice(p, 0.2, 5).vertices, to_offlattice(p, 0.2, 5).vertices)

    def test_bad_amplitude(self):
        with pytest.raises(ValueError):
            to_offlattice(square(), 0.5, 0)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.0, 0.49), seed=st.integers(0, 2**31))
    def test_min_distance_bound(self, a, seed):
        p = random_lattice_polygon(seed % 20, 24, pivots=5)
        x = to_offlattice(p, a, seed).vertices
        d = np.linalg.norm(x[:, None] - x[None], axis=2)[np.triu_indices(len(x), 1)]
        assert d.min() >= 1 - 2 * a * np.sqrt(3) - 1e-12
        assert np.abs(x - p.vertices).max() <= a
