"""Spline construction: constraint absorption, penalty diagonalization,
scaling, prediction round trips, grouping, and spec parsing.

The construction is pinned against an independent oracle: the basis must
reproduce scipy's natural cubic spline interpolant, and the penalty
quadratic form must equal the quadrature of the squared second derivative.
"""

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from sslgam import (
    SmoothSpec,
    build_smooth,
    construct_smooth_data,
    make_group,
    make_predict_dat,
    parse_spec_table,
)
from sslgam.basis import _crs_design, _crs_maps
from sslgam.errors import (
    DegenerateKnotsError,
    MissingDataError,
    NonNumericColumnError,
    SpecParseError,
    UnknownVariableError,
    UnsupportedBasisError,
)


def uniform_x(n=100, seed=42):
    return np.random.default_rng(seed).uniform(0, 1, n)


class TestCRSPrimitives:
    def test_interpolation_matches_scipy_natural_spline(self):
        knots = np.sort(np.random.default_rng(1).uniform(0, 3, 8))
        F, _ = _crs_maps(knots)
        values = np.random.default_rng(2).standard_normal(8)
        grid = np.linspace(knots[0], knots[-1], 500)
        ours = _crs_design(grid, knots, F) @ values
        oracle = CubicSpline(knots, values, bc_type="natural")(grid)
        np.testing.assert_allclose(ours, oracle, atol=1e-10)

    def test_penalty_matches_quadrature(self):
        knots = np.linspace(0.0, 2.0, 6)
        _, S = _crs_maps(knots)
        values = np.random.default_rng(3).standard_normal(6)
        spline = CubicSpline(knots, values, bc_type="natural")
        integral = quad(
            lambda t: spline(t, 2) ** 2, knots[0], knots[-1], points=knots, limit=200
        )[0]
        assert values @ S @ values == pytest.approx(integral, rel=1e-8)

    def test_basis_interpolates_at_knots(self):
        knots = np.sort(np.random.default_rng(4).uniform(-1, 1, 7))
        F, _ = _crs_maps(knots)
        np.testing.assert_allclose(_crs_design(knots, knots, F), np.eye(7), atol=1e-12)

    def test_linear_tails(self):
        # second differences vanish outside the knot range
        knots = np.linspace(0, 1, 5)
        F, _ = _crs_maps(knots)
        outside = np.array([-3.0, -2.0, -1.0])
        rows = _crs_design(outside, knots, F)
        second_diff = rows[0] - 2 * rows[1] + rows[2]
        np.testing.assert_allclose(second_diff, 0.0, atol=1e-12)


@pytest.mark.parametrize("k", [4, 7, 10])
class TestBuildSmooth:
    def test_invariants(self, k):
        block, tr = build_smooth(SmoothSpec("x1", "cr", k), uniform_x())
        assert block.shape == (100, k - 1)
        # constraint: columns sum to zero
        np.testing.assert_allclose(block.sum(axis=0), 0.0, atol=1e-8)
        # unit sample standard deviation
        np.testing.assert_allclose(block.std(axis=0, ddof=1), 1.0, atol=1e-10)
        # penalty identity on the penalized block, zero on the null column
        _, S = _crs_maps(tr.knots)
        S_c = tr.constraint_map.T @ S @ tr.constraint_map
        pen_map = tr.eigen_map[:, :-1]
        np.testing.assert_allclose(pen_map.T @ S_c @ pen_map, np.eye(k - 2), atol=1e-8)
        np.testing.assert_allclose(S_c @ tr.eigen_map[:, -1], 0.0, atol=1e-8)

    def test_column_names(self, k):
        _, tr = build_smooth(SmoothSpec("v", "cr", k), uniform_x())
        expected = tuple(f"v.pen{i + 1}" for i in range(k - 2)) + ("v.null1",)
        assert tr.column_names == expected

    def test_apply_reproduces_training_block(self, k):
        x = uniform_x()
        block, tr = build_smooth(SmoothSpec("x1", "cr", k), x)
        assert np.array_equal(tr.apply(x), block)


class TestBuildSmoothErrors:
    def test_too_few_distinct_values(self):
        x = np.tile(np.arange(5.0), 20)
        with pytest.raises(DegenerateKnotsError):
            build_smooth(SmoothSpec("x", "cr", 7), x)

    def test_too_few_observations(self):
        with pytest.raises(DegenerateKnotsError):
            build_smooth(SmoothSpec("x", "cr", 7), np.arange(7.0))

    def test_k7_names_match_demo_layout(self):
        _, tr = build_smooth(SmoothSpec("x1", "cr", 7), uniform_x())
        assert tr.column_names == (
            "x1.pen1", "x1.pen2", "x1.pen3", "x1.pen4", "x1.pen5", "x1.null1",
        )


class TestConstructSmoothData:
    def make_data(self, n=120, p=10, seed=5):
        rng = np.random.default_rng(seed)
        return pd.DataFrame(rng.standard_normal((n, p)), columns=[f"x{i+1}" for i in range(p)])

    def test_sixty_columns_for_ten_k7_smooths(self):
        data = self.make_data()
        specs = [SmoothSpec(f"x{i+1}", "cr", 7) for i in range(10)]
        design = construct_smooth_data(specs, data)
        assert design.matrix.shape == (120, 60)
        assert len(design.column_names) == 60

    def test_spec_order_determines_column_order(self):
        data = self.make_data(p=2)
        design = construct_smooth_data(
            [SmoothSpec("x1", "cr", 4), SmoothSpec("x2", "cr", 4)], data
        )
        assert design.column_names == [
            "x1.pen1", "x1.pen2", "x1.null1", "x2.pen1", "x2.pen2", "x2.null1",
        ]

    def test_determinism(self):
        data = self.make_data()
        specs = [SmoothSpec(f"x{i+1}", "cr", 5) for i in range(3)]
        a = construct_smooth_data(specs, data)
        b = construct_smooth_data(specs, data)
        assert np.array_equal(a.matrix, b.matrix)

    def test_missing_column(self):
        with pytest.raises(UnknownVariableError):
            construct_smooth_data([SmoothSpec("nope", "cr", 4)], self.make_data())

    def test_non_numeric_column(self):
        data = self.make_data(p=1)
        data["x1"] = data["x1"].astype(str)
        with pytest.raises(NonNumericColumnError):
            construct_smooth_data([SmoothSpec("x1", "cr", 4)], data)

    def test_missing_values_rejected(self):
        data = self.make_data(p=1)
        data.loc[3, "x1"] = np.nan
        with pytest.raises(MissingDataError):
            construct_smooth_data([SmoothSpec("x1", "cr", 4)], data)


class TestMakePredictDat:
    def test_training_round_trip_is_exact(self):
        data = pd.DataFrame(
            np.random.default_rng(6).standard_normal((80, 3)), columns=["a", "b", "c"]
        )
        specs = [SmoothSpec(v, "cr", 6) for v in ("a", "b", "c")]
        design = construct_smooth_data(specs, data)
        rebuilt = make_predict_dat(design.transforms, data)
        assert list(rebuilt.columns) == design.column_names
        assert np.array_equal(rebuilt.to_numpy(), design.matrix)

    def test_single_point_matches_training_row(self):
        # single-row matmuls may use different BLAS kernels, so exactness is
        # only contractual for whole-matrix round trips
        data = pd.DataFrame({"a": np.random.default_rng(7).standard_normal(60)})
        design = construct_smooth_data([SmoothSpec("a", "cr", 5)], data)
        for row in (0, 13, 27, 41, 59):
            single = make_predict_dat(design.transforms, data.iloc[[row]])
            np.testing.assert_allclose(
                single.to_numpy()[0], design.matrix[row], rtol=1e-12, atol=1e-12
            )

    def test_missing_variable(self):
        data = pd.DataFrame({"a": np.arange(30.0)})
        design = construct_smooth_data([SmoothSpec("a", "cr", 4)], data)
        with pytest.raises(UnknownVariableError):
            make_predict_dat(design.transforms, pd.DataFrame({"b": [1.0]}))


class TestMakeGroup:
    def test_basic_grouping(self):
        g = make_group(["x1.pen1", "x1.null1", "x2.pen1", "x2.null1"])
        assert set(g.smooth) == {"x1", "x2"}
        assert g.smooth["x1"].null_cols.tolist() == [1]
        assert g.smooth["x1"].pen_cols.tolist() == [0]
        assert g.parametric_cols.size == 0

    def test_plain_name_is_parametric(self):
        g = make_group(["age"])
        assert not g.smooth
        assert g.parametric_cols.tolist() == [0]

    def test_sixty_column_design(self):
        names = []
        for i in range(10):
            names += [f"x{i+1}.pen{j+1}" for j in range(5)] + [f"x{i+1}.null1"]
        g = make_group(names)
        assert len(g.smooth) == 10
        for grp in g.smooth.values():
            assert grp.null_cols.size == 1 and grp.pen_cols.size == 5

    def test_cover_and_disjoint(self):
        names = ["x1.pen1", "x1.pen2", "x1.null1", "age", "x2.pen1", "x2.null1"]
        g = make_group(names)
        indices = list(g.parametric_cols)
        for grp in g.smooth.values():
            indices += grp.null_cols.tolist() + grp.pen_cols.tolist()
        assert sorted(indices) == list(range(len(names)))

    def test_incomplete_group_falls_back_to_parametric(self):
        g = make_group(["x1.pen1", "x1.pen2"])
        assert not g.smooth
        assert g.parametric_cols.tolist() == [0, 1]

    def test_dotted_variable_names(self):
        g = make_group(["gene.a.pen1", "gene.a.null1"])
        assert set(g.smooth) == {"gene.a"}


class TestSpecTable:
    def test_args_parsing(self):
        table = pd.DataFrame(
            {"Var": ["x1", "x2", "x3"], "Func": ["s", "s", "s"],
             "Args": ["bs='cr', k=7", None, ""]}
        )
        specs = parse_spec_table(table)
        assert [s.k for s in specs] == [7, 10, 10]
        assert all(s.basis == "cr" for s in specs)

    def test_unsupported_basis(self):
        with pytest.raises(UnsupportedBasisError):
            parse_spec_table(pd.DataFrame({"Var": ["x"], "Func": ["s"], "Args": ["bs='tp'"]}))

    def test_bad_func(self):
        with pytest.raises(SpecParseError):
            parse_spec_table(pd.DataFrame({"Var": ["x"], "Func": ["te"], "Args": [""]}))

    def test_k_too_small(self):
        with pytest.raises(SpecParseError):
            parse_spec_table(pd.DataFrame({"Var": ["x"], "Func": ["s"], "Args": ["k=3"]}))

    def test_duplicate_variable(self):
        with pytest.raises(SpecParseError):
            parse_spec_table(
                pd.DataFrame({"Var": ["x", "x"], "Func": ["s", "s"], "Args": ["", ""]})
            )

    def test_unknown_argument(self):
        with pytest.raises(SpecParseError):
            parse_spec_table(pd.DataFrame({"Var": ["x"], "Func": ["s"], "Args": ["m=2"]}))
