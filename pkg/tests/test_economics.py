from __future__ import annotations

import unittest

import numpy as np

from steamflex.optimize.dispatch import solve_dispatch
from steamflex.optimize.economics import (
    CostBreakdown,
    InvestmentModel,
    NpvParams,
    annual_cash_flow,
    annual_savings,
    annual_scale_for,
    cost_breakdown,
    delta_npv,
    investment_cost,
    npv,
    specific_cost,
)
from steamflex.shared.errors import DomainError
from steamflex.system.models import BatteryParams, SystemConfig

from synthetic import SHORT_PIPE, scenario

DH = 2772.0


def boiler_only(load_kw: float, hours: int, volumetric: float = 0.0, capacity: float = 0.0):
    sc = scenario(spot=[0.0] * hours, demand=[load_kw / DH] * hours, volumetric=volumetric,
                  capacity=capacity, months=12)
    result = solve_dispatch(sc, SystemConfig(P_eb_max=1.5 * load_kw * 1e3), SHORT_PIPE, BatteryParams())
    return cost_breakdown(result, sc)


class InvestmentTests(unittest.TestCase):
    def test_published_capacity_anchors(self) -> None:
        model = InvestmentModel()
        anchors = [
            (SystemConfig(P_eb_max=1644e3), "C_eb", 215e3),
            (SystemConfig(P_eb_max=1702e3), "C_eb", 220e3),
            (SystemConfig(P_eb_max=1e6, M_sa_max=438.0), "C_sa", 87e3),
            (SystemConfig(P_eb_max=1e6, M_sa_max=2125.0), "C_sa", 390e3),
        ]
        for config, part, expected in anchors:
            with self.subTest(part=part, expected=expected):
                value = getattr(investment_cost(config, model), part)
                self.assertAlmostEqual(value, expected, delta=0.01 * expected)

    def test_zero_capacities_cost_nothing(self) -> None:
        inv = investment_cost(SystemConfig(P_eb_max=0.0), InvestmentModel())

        self.assertEqual(inv.C_I, 0.0)

    def test_cost_rises_while_specific_cost_falls(self) -> None:
        model = InvestmentModel()
        sizes = [100.0, 500.0, 1000.0, 5000.0]
        totals = [investment_cost(SystemConfig(P_eb_max=1e6, M_sa_max=m), model).C_sa for m in sizes]
        specific = [specific_cost(SystemConfig(P_eb_max=1e6, M_sa_max=m), model)["EUR_per_kg_sa"] for m in sizes]

        self.assertEqual(totals, sorted(totals))
        self.assertEqual(specific, sorted(specific, reverse=True))

    def test_battery_cost_uses_c_rate_exponent(self) -> None:
        model = InvestmentModel()
        slow = investment_cost(SystemConfig(P_eb_max=1e6, Q_b_max=1e6, c_rate=0.5), model).C_b
        fast = investment_cost(SystemConfig(P_eb_max=1e6, Q_b_max=1e6, c_rate=2.0), model).C_b

        self.assertAlmostEqual(slow, 433e3 * 0.5 ** 0.005)
        self.assertGreater(fast, slow)

    def test_cost_factors_scale_each_unit(self) -> None:
        config = SystemConfig(P_eb_max=1e6, M_sa_max=1000.0, Q_b_max=1e6, c_rate=1.0)
        base = investment_cost(config, InvestmentModel())
        scaled = investment_cost(config, InvestmentModel().with_factors(f_sa=0.5, f_b=2.0))

        self.assertAlmostEqual(scaled.C_eb, base.C_eb)
        self.assertAlmostEqual(scaled.C_sa, 0.5 * base.C_sa)
        self.assertAlmostEqual(scaled.C_b, 2.0 * base.C_b)


class TariffTests(unittest.TestCase):
    def test_capacity_tariff_anchors(self) -> None:
        norway = boiler_only(1063.0, 24, capacity=4.386)
        germany = boiler_only(1063.0, 24, capacity=32.11)

        self.assertAlmostEqual(norway.C_pc, 56e3, delta=0.01 * 56e3)
        self.assertAlmostEqual(germany.C_pc, 410e3, delta=0.01 * 410e3)

    def test_volumetric_tariff_anchor(self) -> None:
        # 4.37 GWh over one day
        breakdown = boiler_only(4.37e6 / 24, 24, volumetric=0.03612)

        self.assertAlmostEqual(breakdown.C_ec, 158e3, delta=0.01 * 158e3)
        self.assertAlmostEqual(breakdown.net_energy_cost, breakdown.C_ec, places=3)


class NpvTests(unittest.TestCase):
    def test_single_year_example(self) -> None:
        annual = CostBreakdown(C_S=100.0, C_ec=0.0, C_pc=0.0, C_0=0.0, Pi_fcr=0.0)
        params = NpvParams(discount_rate=0.0, lifetime=1, maintenance_fraction=0.0, year_index_start=1)

        self.assertAlmostEqual(npv(annual, 50.0, params), -150.0)

    def test_zero_flows_and_zero_investment(self) -> None:
        annual = CostBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)

        self.assertEqual(npv(annual, 0.0, NpvParams()), 0.0)

    def test_linearity_in_cash_flow(self) -> None:
        params = NpvParams(maintenance_fraction=0.0)
        once = CostBreakdown(C_S=100.0, C_ec=20.0, C_pc=30.0, C_0=0.0, Pi_fcr=40.0)
        twice = CostBreakdown(C_S=200.0, C_ec=40.0, C_pc=60.0, C_0=0.0, Pi_fcr=80.0)

        self.assertAlmostEqual(npv(twice, 1e3, params) + 1e3, 2.0 * (npv(once, 1e3, params) + 1e3))

    def test_default_horizon_discounts_sixteen_flows(self) -> None:
        annual = CostBreakdown(C_S=1.0, C_ec=0.0, C_pc=0.0, C_0=0.0, Pi_fcr=0.0)
        params = NpvParams(maintenance_fraction=0.0)

        expected = -sum(1.0 / 1.05 ** t for t in range(16))
        self.assertAlmostEqual(npv(annual, 0.0, params), expected)

    def test_cost_dominated_npv_falls_as_discount_rate_falls(self) -> None:
        annual = CostBreakdown(C_S=1e5, C_ec=1e4, C_pc=1e4, C_0=0.0, Pi_fcr=1e3)
        values = [npv(annual, 1e5, NpvParams(discount_rate=r)) for r in np.linspace(0.0, 0.2, 9)]

        self.assertEqual(values, sorted(values))

    def test_maintenance_and_initial_charge_enter_the_flow(self) -> None:
        annual = CostBreakdown(C_S=10.0, C_ec=0.0, C_pc=0.0, C_0=5.0, Pi_fcr=0.0)
        params = NpvParams(maintenance_fraction=0.02)

        self.assertAlmostEqual(annual_cash_flow(annual, 1000.0, params), -10.0 - 5.0 - 20.0)
        self.assertAlmostEqual(annual_cash_flow(annual, 1000.0, params, annual_scale=2.0), -20.0 - 5.0 - 20.0)

    def test_invalid_parameters(self) -> None:
        with self.assertRaises(DomainError):
            NpvParams(discount_rate=1.0)
        with self.assertRaises(DomainError):
            NpvParams(lifetime=0)
        with self.assertRaises(DomainError):
            NpvParams(year_index_start=2)

    def test_delta_and_savings(self) -> None:
        reference = CostBreakdown(C_S=100.0, C_ec=10.0, C_pc=50.0, C_0=0.0, Pi_fcr=0.0)
        candidate = CostBreakdown(C_S=90.0, C_ec=10.0, C_pc=30.0, C_0=4.0, Pi_fcr=6.0)

        self.assertEqual(delta_npv(12.0, 12.0), 0.0)
        self.assertAlmostEqual(annual_savings(reference, candidate), 160.0 - (130.0 - 6.0 + 4.0))


class BreakdownTests(unittest.TestCase):
    def test_breakdown_matches_objective_with_storage_and_fcr(self) -> None:
        rng = np.random.default_rng(5)
        sc = scenario(
            spot=rng.uniform(0.02, 0.2, 48),
            demand=rng.uniform(0.02, 0.15, 48),
            fcr=rng.uniform(0.0, 0.03, 48),
            volumetric=0.01,
            capacity=2.0,
        )
        config = SystemConfig(P_eb_max=700e3, M_sa_max=400.0, Q_b_max=200e3, c_rate=0.5)
        result = solve_dispatch(sc, config, SHORT_PIPE, BatteryParams())

        breakdown = cost_breakdown(result, sc)

        self.assertAlmostEqual(breakdown.net_energy_cost, result.objective, delta=1e-6 * (1 + abs(result.objective)))
        self.assertAlmostEqual(breakdown.C_E, breakdown.C_S + breakdown.C_ec + breakdown.C_pc + breakdown.C_0)
        self.assertGreater(breakdown.C_0, 0.0)

    def test_annual_scale(self) -> None:
        sc = scenario(spot=[0.1] * 48, demand=[0.1] * 48)

        self.assertEqual(annual_scale_for(sc), 1.0)
        self.assertAlmostEqual(annual_scale_for(sc.slice(0, 24)), 365.25)


if __name__ == "__main__":
    unittest.main()
