from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import yaml

from steamflex.config import (
    deep_merge,
    list_presets,
    load_run_config,
    parse_run_config,
    price_unit_factor,
)
from steamflex.shared.errors import ConfigError
from steamflex.shared.units import parse_quantity

from synthetic import write_csv


class ParseQuantityTests(unittest.TestCase):
    def test_converts_to_base_unit(self) -> None:
        self.assertAlmostEqual(parse_quantity("1702 kW", "W"), 1.702e6)
        self.assertAlmostEqual(parse_quantity("2.125 MWh", "Wh"), 2.125e6)
        self.assertAlmostEqual(parse_quantity("438 kg", "kg"), 438.0)
        self.assertAlmostEqual(parse_quantity("4.386 EUR/kW/month", "EUR/kW/month"), 4.386)
        self.assertAlmostEqual(parse_quantity("36.12 EUR/MWh", "EUR/kWh"), 0.03612)
        self.assertAlmostEqual(parse_quantity("10 cm", "m"), 0.1)
        self.assertAlmostEqual(parse_quantity("3.6 t/h", "kg/s"), 1.0)

    def test_celsius_is_accepted_for_temperatures(self) -> None:
        self.assertAlmostEqual(parse_quantity("50 degC", "K"), 323.15)
        self.assertAlmostEqual(parse_quantity("366 K", "K"), 366.0)

    def test_bare_numbers_are_rejected(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            parse_quantity(1702, "W", field="system.P_eb_max")
        self.assertIn("system.P_eb_max", str(ctx.exception))

    def test_wrong_unit_family_is_rejected(self) -> None:
        with self.assertRaises(ConfigError):
            parse_quantity("1702 kWh", "W")
        with self.assertRaises(ConfigError):
            parse_quantity("20 kg", "K")


class PriceUnitTests(unittest.TestCase):
    def test_currency_and_factor(self) -> None:
        self.assertEqual(price_unit_factor("EUR/MWh", "EUR/kWh"), ("EUR", 1e-3))
        self.assertEqual(price_unit_factor("NOK/MW", "EUR/kW"), ("NOK", 1e-3))
        self.assertEqual(price_unit_factor("EUR/MW/h", "EUR/kW"), ("EUR", 1e-3))

    def test_malformed_price_unit(self) -> None:
        with self.assertRaises(ConfigError):
            price_unit_factor("euro per MWh", "EUR/kWh")


class RunConfigTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)
        for name in ("spot", "fcr", "demand"):
            write_csv(self.dir / f"{name}.csv", [1.0] * 24)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _data(self, **extra) -> dict:
        data = {
            "scenario": {
                "spot": {"path": "spot.csv"},
                "fcr": {"path": "fcr.csv"},
                "demand": {"path": "demand.csv"},
            },
            "system": {"P_eb_max": "1702 kW", "M_sa_max": "438 kg"},
        }
        data.update(extra)
        return data

    def test_preset_is_merged_under_user_config(self) -> None:
        cfg = parse_run_config(self._data(seed=4), self.dir, preset="NO-2024")

        self.assertEqual(cfg.preset, "NO-2024")
        self.assertEqual(cfg.seed, 4)
        self.assertEqual(cfg.de.seed, 4)
        self.assertAlmostEqual(cfg.system.P_eb_max, 1.702e6)
        self.assertAlmostEqual(cfg.system.M_sa_max, 438.0)
        self.assertAlmostEqual(cfg.scenario.tariff_capacity, 4.386)
        self.assertAlmostEqual(cfg.scenario.tariff_volumetric, 0.03612)
        self.assertEqual(cfg.scenario.fcr.unit, "NOK/MW")
        self.assertEqual(cfg.scenario.currency_rates, {"NOK": 0.086})
        self.assertEqual(cfg.scenario.acceptance_fraction, 0.5)
        self.assertAlmostEqual(cfg.steam.T_op, 478.2, delta=0.1)
        self.assertEqual(cfg.scenario.spot.path, (self.dir / "spot.csv").resolve())

    def test_presets_are_bundled(self) -> None:
        self.assertEqual(list_presets(), ["DE-2024", "NO-2024"])

    def test_unknown_preset(self) -> None:
        with self.assertRaises(ConfigError):
            parse_run_config(self._data(), self.dir, preset="FR-2024")

    def test_system_and_search_are_exclusive(self) -> None:
        data = self._data(search={"P_eb_max": {"min": "1 MW", "max": "2 MW", "points": 3}, "M_sa_max": "0 kg"})

        with self.assertRaises(ConfigError) as ctx:
            parse_run_config(data, self.dir, preset="DE-2024")
        self.assertIn("not both", str(ctx.exception))

    def test_unknown_keys_are_rejected(self) -> None:
        with self.assertRaises(ConfigError):
            parse_run_config(self._data(solver="glpk"), self.dir, preset="DE-2024")
        data = self._data()
        data["system"]["P_boiler"] = "1 MW"
        with self.assertRaises(ConfigError):
            parse_run_config(data, self.dir, preset="DE-2024")

    def test_missing_input_file_names_the_path(self) -> None:
        data = self._data()
        data["scenario"]["spot"] = {"path": "absent.csv"}

        with self.assertRaises(ConfigError) as ctx:
            parse_run_config(data, self.dir, preset="DE-2024")
        self.assertIn("absent.csv", str(ctx.exception))

    def test_search_axes_and_fixed_values(self) -> None:
        data = self._data()
        del data["system"]
        data["search"] = {
            "M_sa_max": {"min": "0 kg", "max": "2000 kg", "points": 3},
            "P_eb_max": {"min": "1 MW", "max": "2 MW", "points": 3},
            "Q_b_max": {"min": "0 kWh", "max": "1 MWh", "points": 2},
            "c_rate": "1 1/h",
        }

        cfg = parse_run_config(data, self.dir, preset="DE-2024")

        self.assertEqual(cfg.search.shape, (3, 3, 2, 1))
        self.assertTrue(cfg.search.c_rate.fixed)
        self.assertEqual(cfg.search.free_axes(), ["M_sa_max", "P_eb_max", "Q_b_max"])

    def test_config_hash_tracks_content(self) -> None:
        a = parse_run_config(self._data(seed=1), self.dir, preset="DE-2024")
        b = parse_run_config(self._data(seed=1), self.dir, preset="DE-2024")
        c = parse_run_config(self._data(seed=2), self.dir, preset="DE-2024")

        self.assertEqual(a.config_hash(), b.config_hash())
        self.assertNotEqual(a.config_hash(), c.config_hash())

    def test_load_run_config_applies_overrides(self) -> None:
        path = self.dir / "run.yaml"
        path.write_text(yaml.safe_dump(self._data(preset="DE-2024", jobs=2)), encoding="utf-8")

        cfg = load_run_config(path, overrides={"seed": 9, "jobs": None})

        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.jobs, 2)
        self.assertEqual(cfg.source_path, path)

    def test_load_run_config_missing_file(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self.dir / "nope.yaml")
        self.assertIn("config file not found", str(ctx.exception))


class DeepMergeTests(unittest.TestCase):
    def test_nested_mappings_merge_and_scalars_replace(self) -> None:
        base = {"a": {"b": 1, "c": 2}, "d": [1, 2]}
        merged = deep_merge(base, {"a": {"c": 3}, "d": [3]})

        self.assertEqual(merged, {"a": {"b": 1, "c": 3}, "d": [3]})
        self.assertEqual(base["a"]["c"], 2)


if __name__ == "__main__":
    unittest.main()
