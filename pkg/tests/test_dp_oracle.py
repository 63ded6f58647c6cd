from __future__ import annotations

import unittest

import numpy as np

from steamflex.optimize.dispatch import SA_INIT_FRAC, solve_dispatch
from steamflex.system.models import BatteryParams, SteamSystemParams, StorageCoefficients, SystemConfig

from dp_oracle import dp_min_cost
from synthetic import scenario

DH = 3600.0


class LpMatchesDynamicProgrammingTests(unittest.TestCase):
    def _assert_agrees(self, spot, demand_kg, p_max, m_max, fcr=None) -> None:
        sc = scenario(spot=spot, demand=demand_kg / DH, fcr=fcr)
        config = SystemConfig(P_eb_max=p_max * 1e3, M_sa_max=m_max)
        coeffs = StorageCoefficients.lossless(DH, config.P_eb_max, config.T0, m_max)

        result = solve_dispatch(sc, config, SteamSystemParams(), BatteryParams(), coeffs=coeffs)

        m0 = SA_INIT_FRAC * m_max
        expected = dp_min_cost(spot, demand_kg, p_max, m_max, m0, fcr=fcr) + float(np.mean(spot)) * m0
        self.assertEqual(result.status, "optimal")
        self.assertAlmostEqual(result.objective, expected, delta=1e-6 * (1.0 + abs(expected)))

    def test_random_instances_agree(self) -> None:
        rng = np.random.default_rng(2024)
        for k in range(50):
            hours = int(rng.integers(4, 9))
            p_max = int(rng.integers(2, 7))
            m_max = float(rng.choice([0, 5, 10]))
            spot = rng.integers(-2, 20, hours).astype(float)
            demand_kg = rng.integers(0, p_max + 1, hours).astype(float)
            with self.subTest(instance=k, hours=hours, p_max=p_max, m_max=m_max):
                self._assert_agrees(spot, demand_kg, p_max, m_max)

    def test_random_instances_with_fcr_prices_agree(self) -> None:
        rng = np.random.default_rng(4051)
        for k in range(40):
            hours = int(rng.integers(4, 9))
            p_max = int(rng.integers(2, 7))
            m_max = float(rng.choice([0, 5, 10]))
            spot = rng.integers(0, 20, hours).astype(float)
            fcr = rng.integers(0, 11, hours).astype(float)
            demand_kg = rng.integers(0, p_max + 1, hours).astype(float)
            with self.subTest(instance=k, hours=hours, p_max=p_max, m_max=m_max):
                self._assert_agrees(spot, demand_kg, p_max, m_max, fcr=fcr)


if __name__ == "__main__":
    unittest.main()
