from __future__ import annotations

import io
import unittest

import numpy as np

from steamflex.optimize.lp_core import (
    BACKENDS,
    LpBuilder,
    LpSolution,
    dump_lp,
    solve,
    verify_solution,
)
from steamflex.shared.errors import SteamflexError


def production_lp(constant: float = 0.0):
    """max x0 + 2·x1 s.t. x0 + x1 <= 4, x0 + 3·x1 <= 6; optimum (3, 1)."""
    b = LpBuilder()
    x = b.add_variables("x", 2)
    b.add_constraints("budget", [(x[0], 1.0), (x[1], 1.0)], "<=", 4.0)
    b.add_constraints("labour", [(x[0], 1.0), (x[1], 3.0)], "<=", 6.0)
    b.add_objective(x, [-1.0, -2.0])
    b.add_objective_constant(constant)
    return b.build()


class SolveTests(unittest.TestCase):
    def test_small_lp_optimum_on_every_backend(self) -> None:
        lp = production_lp()
        for backend in sorted(BACKENDS):
            with self.subTest(backend=backend):
                sol = solve(lp, backend=backend)

                self.assertEqual(sol.status, "optimal")
                np.testing.assert_allclose(sol.x, [3.0, 1.0], atol=1e-7)
                self.assertAlmostEqual(sol.objective, -5.0, places=7)

    def test_duals_follow_sensitivity_convention(self) -> None:
        lp = production_lp()
        sol = solve(lp, backend="highs-ds")

        self.assertTrue(sol.has_duals)
        np.testing.assert_allclose(sol.duals_ub, [-0.5, -0.5], atol=1e-7)
        self.assertTrue(verify_solution(lp, sol).passed)

    def test_objective_constant_is_reported(self) -> None:
        sol = solve(production_lp(constant=10.0))

        self.assertAlmostEqual(sol.objective, 5.0, places=7)

    def test_scaled_objective_keeps_optimum(self) -> None:
        lp = production_lp(constant=1.0)
        base = solve(lp)
        scaled = solve(lp.scaled_objective(7.0))

        np.testing.assert_allclose(scaled.x, base.x, atol=1e-7)
        self.assertAlmostEqual(scaled.objective, 7.0 * base.objective, places=6)

    def test_equality_and_greater_equal_rows(self) -> None:
        b = LpBuilder()
        x = b.add_variables("x", 2)
        b.add_constraints("total", [(x[0], 1.0), (x[1], 1.0)], "=", 2.0)
        b.add_constraints("floor", [(x[1], 1.0)], ">=", 0.5)
        b.add_objective(x, [1.0, 2.0])
        lp = b.build()

        sol = solve(lp)

        np.testing.assert_allclose(sol.x, [1.5, 0.5], atol=1e-7)
        self.assertEqual(lp.row_name("<=", 0), "floor")
        np.testing.assert_allclose(lp.A_ub.toarray(), [[0.0, -1.0]])

    def test_contradictory_bounds_are_infeasible(self) -> None:
        b = LpBuilder()
        x = b.add_variables("x", 1, 0.0, 0.5)
        b.add_constraints("at_least_one", [(x, 1.0)], ">=", 1.0)
        b.add_objective(x, 1.0)

        sol = solve(b.build())

        self.assertEqual(sol.status, "infeasible")
        self.assertIsNone(sol.x)

    def test_redundant_row_leaves_optimum_unchanged(self) -> None:
        b = LpBuilder()
        x = b.add_variables("x", 2)
        b.add_constraints("budget", [(x[0], 1.0), (x[1], 1.0)], "<=", 4.0)
        b.add_constraints("labour", [(x[0], 1.0), (x[1], 3.0)], "<=", 6.0)
        # implied by budget
        b.add_constraints("budget_doubled", [(x[0], 2.0), (x[1], 2.0)], "<=", 9.0)
        b.add_objective(x, [-1.0, -2.0])

        sol = solve(b.build())

        self.assertEqual(sol.status, "optimal")
        self.assertAlmostEqual(sol.objective, solve(production_lp()).objective, places=7)

    def test_infeasibility_survives_loosening_unrelated_bounds(self) -> None:
        for spare_ub in (1.0, 100.0, np.inf):
            with self.subTest(spare_ub=spare_ub):
                b = LpBuilder()
                x = b.add_variables("x", 1, 0.0, 0.5)
                spare = b.add_variables("spare", 2, 0.0, spare_ub)
                b.add_constraints("at_least_one", [(x, 1.0)], ">=", 1.0)
                b.add_constraints("spare_total", [(spare[0], 1.0), (spare[1], 1.0)], "<=", 1.0)
                b.add_objective(x, 1.0)
                b.add_objective(spare, [-1.0, 0.5])

                self.assertEqual(solve(b.build()).status, "infeasible")

    def test_unknown_backend(self) -> None:
        with self.assertRaises(SteamflexError):
            solve(production_lp(), backend="cplex")


class VerifyTests(unittest.TestCase):
    def test_perturbed_primal_names_worst_row(self) -> None:
        lp = production_lp()
        sol = solve(lp)
        bad = LpSolution(status="optimal", x=sol.x + np.array([0.0, 1.0]), objective=sol.objective)

        diag = verify_solution(lp, bad)

        self.assertFalse(diag.passed)
        self.assertEqual(diag.worst_primal, "labour")
        self.assertIn("labour", diag.summary())

    def test_bound_violation_is_named(self) -> None:
        lp = production_lp()
        bad = LpSolution(status="optimal", x=np.array([-1.0, 0.0]), objective=1.0)

        diag = verify_solution(lp, bad, check_duals=False)

        self.assertEqual(diag.worst_primal, "lower bound of x[0]")

    def test_wrong_dual_sign_fails(self) -> None:
        lp = production_lp()
        sol = solve(lp)
        flipped = LpSolution(
            status="optimal",
            x=sol.x,
            objective=sol.objective,
            duals_ub=np.array([0.5, 0.5]),
            duals_eq=np.zeros(0),
        )

        diag = verify_solution(lp, flipped)

        self.assertFalse(diag.passed)
        self.assertGreater(diag.max_dual_violation, 0.1)


class BuilderTests(unittest.TestCase):
    def test_duplicate_block_and_inverted_bounds(self) -> None:
        b = LpBuilder()
        b.add_variables("x", 2)
        with self.assertRaises(ValueError):
            b.add_variables("x", 1)
        with self.assertRaises(ValueError):
            b.add_variables("y", 1, 2.0, 1.0)

    def test_scalar_index_broadcasts_over_rows(self) -> None:
        b = LpBuilder()
        x = b.add_variables("x", 3)
        peak = b.add_variables("peak", 1)[0]
        b.add_constraints("peak_def", [(peak, 1.0), (x, -1.0)], ">=", 0.0)
        lp = b.build()

        np.testing.assert_allclose(lp.A_ub.toarray(), [[1, 0, 0, -1], [0, 1, 0, -1], [0, 0, 1, -1]])
        self.assertEqual(lp.var_name(3), "peak")
        self.assertEqual(lp.row_name("<=", 2), "peak_def[2]")

    def test_objective_terms_accumulate(self) -> None:
        b = LpBuilder()
        x = b.add_variables("x", 2)
        b.add_objective(x, [1.0, 2.0])
        b.add_objective(x[1], 3.0)

        np.testing.assert_allclose(b.build().c, [1.0, 5.0])

    def test_dump_lists_variables_and_rows(self) -> None:
        buf = io.StringIO()

        dump_lp(production_lp(constant=2.5), buf)

        lines = buf.getvalue().splitlines()
        self.assertEqual(lines[0], "VARIABLES 2")
        self.assertEqual(lines[1], "x[0] 0.0 +inf -1.0")
        self.assertEqual(lines[3], "OBJECTIVE_CONSTANT 2.5")
        self.assertEqual(lines[4], "ROWS 2")
        self.assertEqual(lines[5], "budget <= 4.0 : 1.0 x[0] 1.0 x[1]")
        self.assertEqual(lines[6], "labour <= 6.0 : 1.0 x[0] 3.0 x[1]")


if __name__ == "__main__":
    unittest.main()
