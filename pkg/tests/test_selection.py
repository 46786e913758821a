"""Cross-validation tuning, metrics, curve extraction, and their invariances."""

import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslgam import (
    SSLConfig,
    SmoothSpec,
    SurvivalResponse,
    construct_smooth_data,
    curve_data,
    fit,
    make_group,
    metrics_binomial,
    sim_bai,
    tune,
)
from sslgam.errors import GridBoundaryWarning, SchemaError, SslgamError, StratificationError
from sslgam.selection import metrics_cox, metrics_gaussian

from conftest import make_survival


class TestMetricsBinomial:
    def test_perfect_separation(self):
        y = np.array([0.0, 0.0, 1.0, 1.0])
        p = np.array([0.1, 0.2, 0.8, 0.9])
        met = metrics_binomial(y, p)
        assert met["auc"] == 1.0
        assert met["misclassification"] == 0.0

    def test_uninformative_half(self):
        y = np.array([0.0, 1.0] * 10)
        p = np.full(20, 0.5)
        met = metrics_binomial(y, p)
        assert met["mse"] == pytest.approx(0.25)
        assert met["mae"] == pytest.approx(0.5)
        assert met["auc"] == pytest.approx(0.5)

    def test_hand_computed_pair(self):
        met = metrics_binomial(np.array([0.0, 1.0]), np.array([0.2, 0.8]))
        assert met["misclassification"] == 0.0
        assert met["mae"] == pytest.approx(0.2)

    def test_single_class_auc_undefined(self):
        with pytest.raises(SslgamError):
            metrics_binomial(np.ones(4), np.array([0.1, 0.5, 0.6, 0.9]))

    @settings(max_examples=60, deadline=None)
    @given(
        scores=st.lists(st.floats(-4, 4), min_size=6, max_size=30),
        scale=st.floats(0.1, 5),
        shift=st.floats(-3, 3),
    )
    def test_auc_invariant_under_increasing_transforms(self, scores, scale, shift):
        scores = np.asarray(scores)
        y = (np.arange(scores.size) % 2).astype(float)
        from sslgam.selection import _auc

        base = _auc(y, scores)
        assert _auc(y, scale * scores + shift) == pytest.approx(base, abs=1e-12)
        assert _auc(y, np.tanh(scores)) == pytest.approx(base, abs=1e-12)


class TestTune:
    @pytest.fixture(scope="class")
    def problem(self):
        sim = sim_bai(200, 4, "binomial", seed=21)
        specs = [SmoothSpec(f"x{j+1}", "cr", 5) for j in range(4)]
        design = construct_smooth_data(specs, sim.data)
        groups = make_group(design.column_names)
        return sim, design, groups

    def test_row_per_candidate_and_column_order(self, problem):
        sim, design, groups = problem
        grid = np.array([0.02, 0.05, 0.08])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cv = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                      SSLConfig(), grid, nfolds=4, seed=0)
        assert list(cv.table.columns) == [
            "s0", "deviance", "auc", "mse", "mae", "misclassification"
        ]
        assert cv.table["s0"].tolist() == grid.tolist()
        assert np.all(np.isfinite(cv.table.to_numpy()))

    def test_seed_determinism(self, problem):
        sim, design, groups = problem
        grid = np.array([0.03, 0.06])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                     SSLConfig(), grid, nfolds=4, seed=5)
            b = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                     SSLConfig(), grid, nfolds=4, seed=5)
        assert a.table.to_csv() == b.table.to_csv()

    def test_fold_ids_used_verbatim(self, problem):
        sim, design, groups = problem
        n = len(sim.data)
        fold_ids = np.arange(n) % 3
        grid = np.array([0.04])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                     SSLConfig(), grid, fold_ids=fold_ids, seed=1)
            b = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                     SSLConfig(), grid, fold_ids=fold_ids, seed=99)
        assert a.table.to_csv() == b.table.to_csv()

    def test_parallel_matches_serial(self, problem):
        sim, design, groups = problem
        grid = np.array([0.03, 0.07])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            serial = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                          SSLConfig(), grid, nfolds=4, seed=2, n_jobs=1)
            threaded = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                            SSLConfig(), grid, nfolds=4, seed=2, n_jobs=3)
        assert serial.table.to_csv() == threaded.table.to_csv()

    def test_boundary_warning(self, problem):
        sim, design, groups = problem
        with pytest.warns(GridBoundaryWarning):
            tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                 SSLConfig(), np.array([0.005, 0.5]), nfolds=4, seed=3)

    def test_ncv_averages_fresh_draws(self, problem):
        sim, design, groups = problem
        grid = np.array([0.05])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            once = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                        SSLConfig(), grid, nfolds=4, ncv=1, seed=4)
            twice = tune(design, sim.data["y"].to_numpy(), "binomial", groups,
                         SSLConfig(), grid, nfolds=4, ncv=2, seed=4)
        assert np.all(np.isfinite(twice.table.to_numpy()))
        # repetitions use fresh fold draws, so the averages differ in general
        assert once.table["deviance"].iloc[0] != twice.table["deviance"].iloc[0]

    def test_grid_validation(self, problem):
        sim, design, groups = problem
        y = sim.data["y"].to_numpy()
        with pytest.raises(SchemaError):
            tune(design, y, "binomial", groups, SSLConfig(), np.array([0.05, 0.05]))
        with pytest.raises(SchemaError):
            tune(design, y, "binomial", groups, SSLConfig(), np.array([0.05, 0.9]))
        with pytest.raises(SchemaError):
            tune(design, y, "binomial", groups, SSLConfig(), np.array([0.05]), nfolds=1)

    def test_stratification_failure(self):
        # 3 positives cannot reach every part of 5 folds
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 2))
        y = np.r_[np.ones(3), np.zeros(17)]
        with pytest.raises(StratificationError):
            tune(X, y, "binomial", None, SSLConfig(), np.array([0.05]), nfolds=5, seed=0)

    def test_cox_metrics(self):
        X, resp = make_survival(n=100, seed=31)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cv = tune(X, resp, "cox", None, SSLConfig(), np.array([0.03, 0.06]),
                      nfolds=4, seed=6)
        assert list(cv.table.columns) == ["s0", "c_index", "deviance"]
        assert np.all(np.isfinite(cv.table.to_numpy()))

    def test_best_s0_tie_goes_to_smaller(self):
        from sslgam.selection import CVResult

        table = pd.DataFrame({"s0": [0.01, 0.02, 0.03], "deviance": [5.0, 4.0, 4.0]})
        assert CVResult("gaussian", table).best_s0() == 0.02


class TestOtherMetrics:
    def test_gaussian(self):
        met = metrics_gaussian([1.0, 2.0], [1.0, 1.0])
        assert met["deviance"] == pytest.approx(1.0)
        assert met["mse"] == pytest.approx(0.5)
        assert met["mae"] == pytest.approx(0.5)

    def test_cox(self):
        resp = SurvivalResponse(np.array([1.0, 2.0, 3.0, 4.0]), np.ones(4))
        met = metrics_cox(np.array([4.0, 3.0, 1.0, 2.0]), resp)
        assert met["c_index"] == pytest.approx(5 / 6)
        assert np.isfinite(met["deviance"])


class TestCurveData:
    @pytest.fixture(scope="class")
    def recovery(self):
        sim = sim_bai(500, 6, "binomial", seed=42)
        specs = [SmoothSpec(f"x{j+1}", "cr", 7) for j in range(6)]
        design = construct_smooth_data(specs, sim.data)
        groups = make_group(design.column_names)
        model = fit(design, sim.data["y"].to_numpy(), "binomial", groups)
        return sim, design, model

    def test_grid_contract(self, recovery):
        sim, design, model = recovery
        table = curve_data(model, "x1", design.transforms, -2.0, 2.0, n_points=200)
        assert len(table) == 200
        assert table["x"].iloc[0] == -2.0
        assert table["x"].iloc[-1] == 2.0

    def test_zeroed_variable_contributes_nothing(self, recovery):
        sim, design, model = recovery
        import copy

        silenced = copy.deepcopy(model)
        grp = silenced.groups.smooth["x2"]
        silenced.coefficients[grp.null_cols] = 0.0
        silenced.coefficients[grp.pen_cols] = 0.0
        table = curve_data(silenced, "x2", design.transforms, -2.0, 2.0, 50)
        np.testing.assert_array_equal(table["contribution"].to_numpy(), 0.0)

    def test_linear_signal_recovered(self, recovery):
        sim, design, model = recovery
        x = sim.data["x3"]
        table = curve_data(model, "x3", design.transforms, x.min(), x.max(), 300)
        truth = 6.0 * (table["x"].to_numpy() - 0.5)
        corr = np.corrcoef(table["contribution"], truth - truth.mean())[0, 1]
        assert corr >= 0.95

    def test_quadratic_signal_recovered(self, recovery):
        sim, design, model = recovery
        x = sim.data["x4"]
        table = curve_data(model, "x4", design.transforms, x.min(), x.max(), 300)
        truth = -5.0 * (table["x"].to_numpy() ** 2 - 0.3)
        corr = np.corrcoef(table["contribution"], truth - truth.mean())[0, 1]
        assert corr >= 0.9

    def test_unknown_variable(self, recovery):
        sim, design, model = recovery
        from sslgam.errors import UnknownVariableError

        with pytest.raises(UnknownVariableError):
            curve_data(model, "zz", design.transforms, 0, 1, 10)
