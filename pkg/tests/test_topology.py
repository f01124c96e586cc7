import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import FIGURE_EIGHT_PD, TREFOIL_PD, parametric, random_lattice_polygon
from geoknot.geometry import OCTANT_TILT, projection_crossings, tait_number, writhe_matrix
from geoknot.lattice import bfacf_move, load_seed_polygon, make_rng
from geoknot.topology import (DIRECTION_SCHEDULE, UNKNOWN, KnotDiagram, alexander_determinant,
                              diagram_from_gauss, diagram_from_pd, invariants, knot_determinant,
                              project_to_diagram, vassiliev_v2_exact, vassiliev_v2_writhe,
                              verify_knot_class)

SQUARE = np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], dtype=float)


def directions(k=8, seed=11):
    d = np.random.default_rng(seed).normal(size=(k, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


class TestDiagram:
    def test_planar_polygon_has_no_crossings(self):
        t = np.linspace(0, 2 * np.pi, 9, endpoint=False)
        d = project_to_diagram(np.c_[np.cos(t), np.sin(t), 0 * t], (0, 0, 1))
        assert d.n_crossings == 0

    def test_seed_tait_number(self):
        v = load_seed_polygon("3_1").vertices.astype(float)
        d = project_to_diagram(v, OCTANT_TILT)
        assert d.n_crossings >= 3
        assert d.writhe() == tait_number(v, OCTANT_TILT)

    def test_mirror_negates_signs(self, trefoil_curve):
        a = projection_crossings(trefoil_curve, (0.1, 0.2, 1.0))
        b = projection_crossings(trefoil_curve * [1, 1, -1], (0.1, 0.2, 1.0))
        assert len(a) == len(b)
        assert sorted(a[:, 5]) == sorted(-b[:, 5])

    def test_diagram_structure(self):
        for pd in (TREFOIL_PD, FIGURE_EIGHT_PD):
            d = diagram_from_pd(pd)
            assert d.n_arcs == d.n_crossings == len(pd)
            bounds = [a for c in d.crossings for a in (c.under_in, c.under_out)]
            assert sorted(bounds) == sorted(2 * list(range(d.n_arcs)))
            assert {c.sign for c in d.crossings} <= {-1, 1}

    def test_gauss_errors(self):
        with pytest.raises(ValueError):
            diagram_from_gauss([(0, True, 1)])
        with pytest.raises(ValueError):
            diagram_from_gauss([(0, True, 1), (0, True, 1)])

    def test_gauss_string(self):
        s = diagram_from_pd(TREFOIL_PD).gauss_string().split()
        assert len(s) == 6 and all(tok[0] in "OU" and tok[-1] in "+-" for tok in s)


class TestAlexander:
    def test_empty_diagram(self):
        assert alexander_determinant(KnotDiagram([], [])) == 1
        assert knot_determinant(KnotDiagram([], [])) == 1

    @pytest.mark.parametrize("pd,det", [(TREFOIL_PD, 3), (FIGURE_EIGHT_PD, 5)])
    def test_pd_codes(self, pd, det):
        d = diagram_from_pd(pd)
        assert knot_determinant(d) == det
        assert round(oracles.alexander_oracle(pd, -1.0)) == det

    @pytest.mark.parametrize("pd", [TREFOIL_PD, FIGURE_EIGHT_PD])
    @pytest.mark.parametrize("t", [-1.0, -0.5, 2.0, 3.0])
    def test_matches_oracle_off_minus_one(self, pd, t):
        # the two matrices may differ by row/column sign and a power of t
        ours = alexander_determinant(diagram_from_pd(pd), t)
        theirs = oracles.alexander_oracle(pd, t)
        ratios = [abs(t) ** k for k in range(-3, 4)]
        assert any(abs(ours - theirs * r) < 1e-9 * max(1, theirs) for r in ratios)

    @pytest.mark.parametrize("kind,det,v2", [("unknot", 1, 0), ("trefoil", 3, 1), ("figure8", 5, -1)])
    def test_curves_over_eight_directions(self, kind, det, v2):
        x = parametric(kind)
        for d in directions():
            diagram = project_to_diagram(x, d)
            assert knot_determinant(diagram) == det
            assert vassiliev_v2_exact(diagram) == v2


class TestV2Exact:
    def test_unknot(self):
        assert vassiliev_v2_exact(KnotDiagram([], [])) == 0

    def test_trefoil_both_chiralities(self):
        d = diagram_from_pd(TREFOIL_PD)
        assert vassiliev_v2_exact(d) == vassiliev_v2_exact(d.mirror()) == 1

    def test_figure_eight(self):
        assert vassiliev_v2_exact(diagram_from_pd(FIGURE_EIGHT_PD)) == -1

    def test_mirrored_curve(self, trefoil_curve):
        assert invariants(trefoil_curve * [1, 1, -1]) == (3, 1)


class TestV2Writhe:
    def test_planar_zero(self):
        t = np.linspace(0, 2 * np.pi, 20, endpoint=False)
        assert vassiliev_v2_writhe(writhe_matrix(np.c_[np.cos(t), np.sin(t), 0 * t])) == 0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_prefix_sum_matches_naive(self, seed):
        x = np.random.default_rng(seed).normal(size=(40, 3))
        W = writhe_matrix(x)
        assert abs(vassiliev_v2_writhe(W) - oracles.v2_contraction_naive(W.entries)) < 1e-9

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(4, 25))
    def test_prefix_sum_property(self, seed, n):
        A = np.random.default_rng(seed).normal(size=(n, n))
        W = A + A.T
        assert abs(vassiliev_v2_writhe(W) - oracles.v2_contraction_naive(W)) < 1e-9

    def test_trefoil_larger_than_unknot(self, trefoil_curve, unknot_curve):
        assert vassiliev_v2_writhe(writhe_matrix(trefoil_curve)) > 0.5
        assert abs(vassiliev_v2_writhe(writhe_matrix(unknot_curve))) < 0.5


class TestVerify:
    def test_square(self):
        r = verify_knot_class(SQUARE, "0_1")
        assert r.verdict == "0_1" and r.checks_passed == ["determinant", "v2"]

    def test_trefoil_as_unknot(self):
        r = verify_knot_class(load_seed_polygon("3_1"), "0_1")
        assert r.verdict == UNKNOWN and r.determinant == 3

    def test_trefoil_after_bfacf(self):
        p = load_seed_polygon("3_1")
        rng = make_rng(21)
        for _ in range(10_000):
            bfacf_move(p, rng, max_length=80)
        assert verify_knot_class(p, "3₁").verdict == "3_1"

    def test_figure_eight_rejected_everywhere(self, figure8_curve):
        for label in ("0_1", "3_1"):
            assert verify_knot_class(figure8_curve, label).verdict == UNKNOWN

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            verify_knot_class(SQUARE, "4_1")

    def test_random_unknots_verify(self):
        for seed in range(3):
            p = random_lattice_polygon(seed, 60)
            assert verify_knot_class(p, "0_1", directions=directions(4, seed)).verdict == "0_1"

    def test_schedule_is_normalized(self):
        assert np.allclose(np.linalg.norm(DIRECTION_SCHEDULE, axis=1), 1)
