import math
import shutil

import numpy as np
import pytest

from aupatterns import reference
from aupatterns.analytics import (
    FixtureError,
    MethodScoreTable,
    cross_method_std,
    fixture_path,
    imbalance_correlations,
    load_histogram_fixture,
    load_method_scores,
    load_ones_reference,
    load_rates,
    ones_baseline,
    pearson,
    std,
    variance,
    verify_fixtures,
)
from aupatterns.annotations import AuRegistry
from aupatterns.metrics import FoldScores, pooled_report
from aupatterns.mining import BaseRates

from conftest import make_table


class TestPearson:
    def test_self_correlation(self, rng):
        x = rng.random(20)
        assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_anti_correlation(self, rng):
        x = rng.random(20)
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_undefined(self):
        assert math.isnan(pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]))
        assert math.isnan(pearson([1.0, 1.0], [2.0, 2.0]))

    def test_length_checks(self):
        with pytest.raises(ValueError):
            pearson([1.0], [1.0])
        with pytest.raises(ValueError):
            pearson([1.0, 2.0], [1.0])

    def test_affine_invariance(self, rng):
        x = rng.random(15)
        y = rng.random(15)
        base = pearson(x, y)
        assert pearson(3.5 * x + 2.0, y) == pytest.approx(base, abs=1e-9)
        assert pearson(x, 0.1 * y - 7.0) == pytest.approx(base, abs=1e-9)
        assert pearson(-2.0 * x, y) == pytest.approx(-base, abs=1e-9)


class TestVariance:
    def test_constant(self):
        assert variance([0.0, 0.0, 0.0]) == 0.0

    def test_two_values(self):
        assert variance([0.0, 1.0]) == pytest.approx(0.5, abs=1e-15)
        assert std([0.0, 1.0]) == pytest.approx(math.sqrt(0.5), abs=1e-15)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            variance([1.0])


class TestFixtures:
    def test_checksums_verify(self):
        digests = verify_fixtures()
        assert set(digests) == {
            "bp4d_rates.csv",
            "disfa_rates.csv",
            "bp4d_scores.csv",
            "disfa_scores.csv",
            "bp4d_histogram.csv",
            "ones_experiment1.csv",
        }

    def test_tampered_fixture_detected(self, tmp_path):
        src = fixture_path("checksums.json").parent
        for f in src.iterdir():
            shutil.copy(f, tmp_path / f.name)
        target = tmp_path / "bp4d_rates.csv"
        target.write_text(target.read_text().replace("0.62", "0.63"))
        with pytest.raises(FixtureError, match="mismatch"):
            verify_fixtures(tmp_path)

    def test_rate_fixture_values(self):
        rates = load_rates(fixture_path("bp4d_rates.csv"))
        assert rates.rate_of(10) == pytest.approx(0.62)
        assert rates.rate_of(2) == pytest.approx(0.18)


class TestImbalanceCorrelations:
    def test_identical_column(self):
        rates = BaseRates((1, 2, 4), (0.1, 0.5, 0.9))
        table = MethodScoreTable((1, 2, 4), {"m": (0.1, 0.5, 0.9)})
        rep = imbalance_correlations(table, rates)
        assert rep.correlations["m"] == pytest.approx(1.0, abs=1e-12)

    def test_bp4d_fixture_average(self):
        scores = load_method_scores(fixture_path("bp4d_scores.csv"))
        rates = load_rates(fixture_path("bp4d_rates.csv"))
        rep = imbalance_correlations(scores, rates, exclude=("Ones",))
        avg = np.mean([rep.correlations[m] for m in reference.PUBLISHED_CORR_BP4D])
        assert avg == pytest.approx(reference.PUBLISHED_CORR_BP4D_AVG, abs=0.02)

    def test_disfa_fixture_average(self):
        scores = load_method_scores(fixture_path("disfa_scores.csv"))
        rates = load_rates(fixture_path("disfa_rates.csv"))
        rep = imbalance_correlations(scores, rates)
        avg = np.mean([rep.correlations[m] for m in reference.PUBLISHED_CORR_DISFA])
        assert avg == pytest.approx(reference.PUBLISHED_CORR_DISFA_AVG, abs=0.02)

    def test_published_spot_values(self):
        scores = load_method_scores(fixture_path("bp4d_scores.csv"))
        rates = load_rates(fixture_path("bp4d_rates.csv"))
        rep = imbalance_correlations(scores, rates)
        assert rep.correlations["LSTM"] == pytest.approx(0.680, abs=0.02)
        assert rep.correlations["iCPM"] == pytest.approx(0.967, abs=0.02)

    def test_ones_column_correlation(self):
        rates = load_rates(fixture_path("bp4d_rates.csv"))
        ones = load_ones_reference(fixture_path("ones_experiment1.csv"))
        col = [ones[au]["f1_binary"] for au in rates.codes]
        assert pearson(rates.rates, col) == pytest.approx(
            reference.ONES_F1_BINARY_CORR, abs=0.02
        )

    def test_column_order_invariance(self):
        rates = BaseRates((1, 2, 4), (0.1, 0.5, 0.9))
        cols = {"a": (0.2, 0.4, 0.8), "b": (0.9, 0.1, 0.3)}
        fwd = imbalance_correlations(MethodScoreTable((1, 2, 4), cols), rates)
        rev = imbalance_correlations(
            MethodScoreTable((1, 2, 4), dict(reversed(cols.items()))), rates
        )
        assert fwd.correlations == rev.correlations
        assert fwd.average == rev.average

    def test_sparse_method_skipped(self):
        rates = BaseRates((1, 2, 4), (0.1, 0.5, 0.9))
        table = MethodScoreTable((1, 2, 4), {"thin": (0.3, None, None)})
        rep = imbalance_correlations(table, rates)
        assert "thin" in rep.skipped
        assert math.isnan(rep.correlations["thin"])

    def test_row_misalignment_rejected(self):
        rates = BaseRates((1, 2, 4), (0.1, 0.5, 0.9))
        table = MethodScoreTable((1, 2, 6), {"m": (0.1, 0.5, 0.9)})
        with pytest.raises(ValueError):
            imbalance_correlations(table, rates)


class TestCrossMethodStd:
    def test_identical_columns(self):
        table = MethodScoreTable((1, 2), {"a": (0.3, 0.4), "b": (0.3, 0.4)})
        per_au, avg = cross_method_std(table)
        assert per_au == {1: 0.0, 2: 0.0} and avg == 0.0

    def test_bp4d_fixture(self):
        scores = load_method_scores(fixture_path("bp4d_scores.csv"))
        per_au, avg = cross_method_std(scores, exclude=("Ones",))
        assert avg == pytest.approx(reference.PUBLISHED_STD_BP4D_AVG, abs=0.01)
        assert per_au[1] == pytest.approx(0.0671, abs=0.01)

    def test_disfa_fixture(self):
        scores = load_method_scores(fixture_path("disfa_scores.csv"))
        per_au, avg = cross_method_std(scores)
        assert per_au[9] == pytest.approx(0.2541, abs=0.01)
        assert avg == pytest.approx(reference.PUBLISHED_STD_DISFA_AVG, abs=0.01)

    def test_insufficient_columns_flagged(self):
        table = MethodScoreTable((1, 2), {"a": (0.3, None), "b": (0.3, None)})
        per_au, _ = cross_method_std(table)
        assert math.isnan(per_au[2])


class TestOnesBaseline:
    def test_zero_rate(self):
        rep = ones_baseline(BaseRates((1,), (0.0,)))
        row = rep.rows[0]
        assert row.f1_binary.value == 0.0 and row.f1_binary.degenerate
        assert row.f1_micro.value == 0.0 and not row.f1_micro.degenerate
        assert row.f1_macro.value == 0.0 and not row.f1_macro.degenerate
        assert row.auc.value == 0.5 and row.auc.degenerate

    def test_closed_form_value(self):
        rep = ones_baseline(BaseRates((10,), (0.62,)))
        assert rep.rows[0].f1_binary.value == pytest.approx(0.7654, abs=1e-4)

    def test_equals_direct_metric_evaluation(self, rng):
        # oracle equivalence: an explicit all-ones prediction over a table
        # realizing each rate reproduces the closed forms to 1e-12
        reg = AuRegistry((1, 2, 4))
        n = 160
        counts = [0, 40, 160]
        bits_rows = [
            "".join("1" if i < c else "0" for c in counts) for i in range(n)
        ]
        table = make_table(reg, [("S", "T", i, b) for i, b in enumerate(bits_rows)])
        from aupatterns.mining import base_rates

        rates = base_rates(table)
        closed = ones_baseline(rates)
        truth = table.pattern_matrix()
        keys = table.keys()
        fold = FoldScores(keys, truth, np.ones((n, 3)))
        direct = pooled_report([fold], reg, threshold=0.5)
        for crow, drow in zip(closed.rows, direct.rows):
            assert crow.f1_binary.value == pytest.approx(drow.f1_binary.value, abs=1e-12)
            assert crow.f1_micro.value == pytest.approx(drow.f1_micro.value, abs=1e-12)
            assert crow.f1_macro.value == pytest.approx(drow.f1_macro.value, abs=1e-12)
            assert crow.auc.value == drow.auc.value == 0.5
