from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np

from steamflex.shared.errors import DomainError, IngestionError, ScenarioValidationError
from steamflex.system.market import (
    FcrMarket,
    TariffSchedule,
    apply_weekend_scaling,
    assemble_scenario,
    build_acceptance_mask,
    check_leap_year_horizon,
    convert_currency,
    extend_periodic,
    lint_scenario,
    load_timeseries,
    resample_mean,
)

from synthetic import scenario, series, write_csv


class LoadTimeseriesTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _write(self, text: str) -> Path:
        path = self.dir / "series.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_canonical_file_loads_with_inferred_step(self) -> None:
        path = write_csv(self.dir / "spot.csv", [10.0, 20.0, 30.0])

        ts = load_timeseries(path, "EUR/kWh")

        self.assertEqual(len(ts), 3)
        self.assertEqual(ts.dt, 3600)
        self.assertEqual(ts.unit, "EUR/kWh")
        self.assertEqual(ts.start.isoformat(), "2024-01-01T00:00:00+00:00")
        np.testing.assert_allclose(ts.values, [10.0, 20.0, 30.0])

    def test_gap_is_reported_with_line_number(self) -> None:
        path = self._write(
            "timestamp,value\n"
            "2024-01-01T00:00:00Z,1\n"
            "2024-01-01T01:00:00Z,2\n"
            "2024-01-01T03:00:00Z,3\n"
        )

        with self.assertRaises(IngestionError) as ctx:
            load_timeseries(path, "kg/s")
        self.assertIn("gap", str(ctx.exception))
        self.assertEqual(ctx.exception.line, 4)
        self.assertEqual(ctx.exception.path, str(path))

    def test_malformed_value_names_its_line(self) -> None:
        path = self._write("timestamp,value\n2024-01-01T00:00:00Z,1\n2024-01-01T01:00:00Z,abc\n")

        with self.assertRaises(IngestionError) as ctx:
            load_timeseries(path, "kg/s")
        self.assertEqual(ctx.exception.line, 3)

    def test_duplicate_timestamp_is_rejected(self) -> None:
        path = self._write("timestamp,value\n2024-01-01T00:00:00Z,1\n2024-01-01T00:00:00Z,2\n")

        with self.assertRaises(IngestionError) as ctx:
            load_timeseries(path, "kg/s")
        self.assertIn("duplicate", str(ctx.exception))

    def test_missing_column_and_missing_file(self) -> None:
        path = self._write("time,price\n2024-01-01T00:00:00Z,1\n")

        with self.assertRaises(IngestionError):
            load_timeseries(path, "EUR/kWh")
        with self.assertRaises(IngestionError):
            load_timeseries(self.dir / "absent.csv", "EUR/kWh")


class TransformTests(unittest.TestCase):
    def test_resample_preserves_integral(self) -> None:
        quarter = series([1, 2, 3, 4, 5, 6, 7, 8], "kg/s", dt=900)

        hourly = resample_mean(quarter, 3600)

        np.testing.assert_allclose(hourly.values, [2.5, 6.5])
        self.assertAlmostEqual(hourly.integral(), quarter.integral())

    def test_resample_rejects_partial_windows(self) -> None:
        with self.assertRaises(DomainError):
            resample_mean(series([1, 2, 3], "kg/s", dt=900), 3600)

    def test_extend_periodic_wraps_values(self) -> None:
        ts = extend_periodic(series([1, 2, 3], "kg/s"), 7)

        np.testing.assert_array_equal(ts.values, [1, 2, 3, 1, 2, 3, 1])

    def test_resample_then_extend_keeps_per_period_integral(self) -> None:
        rng = np.random.default_rng(12)
        quarter_hourly = series(rng.uniform(0.0, 2.0, 4 * 24), "kg/s", dt=900)

        hourly = resample_mean(quarter_hourly, 3600)
        week = extend_periodic(hourly, 7 * 24)

        day_integral = float(np.sum(quarter_hourly.values) * 900)
        per_day = week.values.reshape(7, 24).sum(axis=1) * 3600
        np.testing.assert_allclose(per_day, day_integral, rtol=1e-12)

    def test_weekend_scaling_follows_calendar(self) -> None:
        # 2024-01-01 is a Monday
        week = series(np.ones(7 * 24), "kg/s")

        scaled = apply_weekend_scaling(week, 0.25)

        np.testing.assert_allclose(scaled.values[: 5 * 24], 1.0)
        np.testing.assert_allclose(scaled.values[5 * 24:], 0.25)

    def test_rebase_moves_start_only(self) -> None:
        ts = series([1, 2], "kg/s", start="2024-01-08T11:00:00Z").rebase("2024-01-01T00:00:00Z")

        self.assertEqual(ts.start.isoformat(), "2024-01-01T00:00:00+00:00")
        np.testing.assert_array_equal(ts.values, [1, 2])

    def test_currency_conversion_retags_unit(self) -> None:
        nok = series([100.0], "NOK/kW")

        eur = convert_currency(nok, 0.086)

        self.assertEqual(eur.unit, "EUR/kW")
        self.assertAlmostEqual(eur.values[0], 8.6)


class FcrMarketTests(unittest.TestCase):
    def test_acceptance_mask_has_exact_share_and_is_seeded(self) -> None:
        a = build_acceptance_mask(101, 0.5, seed=7)
        b = build_acceptance_mask(101, 0.5, seed=7)
        c = build_acceptance_mask(101, 0.5, seed=8)

        self.assertEqual(int(a.sum()), 51)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_acceptance_mask_count_over_lengths_and_fractions(self) -> None:
        for n in (1, 2, 7, 24, 101, 8784):
            for fraction in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
                with self.subTest(n=n, fraction=fraction):
                    mask = build_acceptance_mask(n, fraction, seed=n)

                    self.assertEqual(mask.shape, (n,))
                    self.assertLessEqual(abs(int(mask.sum()) - fraction * n), 0.5)
        self.assertEqual(int(build_acceptance_mask(7, 0.25, seed=1).sum()), 2)
        self.assertEqual(int(build_acceptance_mask(2, 0.25, seed=1).sum()), 1)
        self.assertEqual(int(build_acceptance_mask(8784, 0.1, seed=1).sum()), 878)

    def test_sub_hourly_mask_is_constant_within_each_hour(self) -> None:
        price = series(np.ones(4 * 24), "EUR/kW", dt=900)

        market = FcrMarket.from_price(price, 0.5, seed=3)

        blocks = market.acceptance.reshape(24, 4)
        self.assertTrue(np.all(blocks == blocks[:, :1]))
        self.assertEqual(int(blocks[:, 0].sum()), 12)

    def test_effective_price_zeroes_rejected_hours(self) -> None:
        market = FcrMarket(price=series([5.0, 6.0], "EUR/kW"), acceptance=np.array([True, False]))

        np.testing.assert_array_equal(market.effective_price(), [5.0, 0.0])


class ScenarioTests(unittest.TestCase):
    def test_assembly_collects_every_issue(self) -> None:
        spot = series([0.1, 0.1, 0.1], "EUR/kWh")
        demand = series([1.0, -1.0], "kg/s")
        fcr = FcrMarket(price=series([1.0, 1.0, 1.0], "NOK/kW"), acceptance=np.ones(3, bool))

        with self.assertRaises(ScenarioValidationError) as ctx:
            assemble_scenario(spot, TariffSchedule(0.0, 0.0), fcr, demand)
        issues = ctx.exception.issues
        self.assertTrue(any("length" in i for i in issues))
        self.assertTrue(any("negative demand" in i for i in issues))
        self.assertTrue(any("unit" in i for i in issues))

    def test_misaligned_start_is_reported(self) -> None:
        spot = series([0.1, 0.1], "EUR/kWh")
        demand = series([1.0, 1.0], "kg/s", start="2024-01-02T00:00:00Z")
        fcr = FcrMarket(price=series([0.0, 0.0], "EUR/kW"), acceptance=np.ones(2, bool))

        with self.assertRaises(ScenarioValidationError) as ctx:
            assemble_scenario(spot, TariffSchedule(0.0, 0.0), fcr, demand)
        self.assertTrue(any("start" in i for i in ctx.exception.issues))

    def test_months_default_from_horizon_and_override(self) -> None:
        derived = scenario([0.1] * 24, [0.0] * 24)
        fixed = scenario([0.1] * 24, [0.0] * 24, months=12)

        self.assertAlmostEqual(derived.months, 24 * 3600 / (365.25 * 86400 / 12))
        self.assertEqual(fixed.months, 12.0)

    def test_slice_scales_tariff_months_and_is_marked(self) -> None:
        sc = scenario([0.1] * 48, [1.0] * 48, months=2)

        part = sc.slice(24, 12)

        self.assertTrue(part.is_slice)
        self.assertEqual(part.horizon_steps, 12)
        self.assertAlmostEqual(part.months, 0.5)
        self.assertEqual(part.start.isoformat(), "2024-01-02T00:00:00+00:00")

    def test_leap_year_check(self) -> None:
        with self.assertRaises(DomainError):
            check_leap_year_horizon(scenario([0.1] * 24, [1.0] * 24))
        check_leap_year_horizon(scenario([0.1] * 8784, [1.0] * 8784))

    def test_lint_reports_negative_prices_and_zero_demand(self) -> None:
        sc = scenario([-0.01, 0.1], [0.0, 0.0])

        warnings = lint_scenario(sc)

        self.assertTrue(any("negative price" in w for w in warnings))
        self.assertTrue(any("demand is zero" in w for w in warnings))
        self.assertTrue(any("FCR profit will be zero" in w for w in warnings))


if __name__ == "__main__":
    unittest.main()
