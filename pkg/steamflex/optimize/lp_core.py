"""Sparse linear-program construction, solution and optimality verification.

Problems are assembled block-wise: every variable block and constraint group
is added with numpy index arrays, so an annual hourly horizon is built without
per-row Python loops. The frozen :class:`LinearProgram` is solver-agnostic;
backends are registered by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from steamflex.shared.errors import SteamflexError
from steamflex.shared.log import vprint

DEFAULT_TOL = 1e-6
STATUSES = ("optimal", "infeasible", "unbounded", "numerical_failure")

IndexLike = Union[int, np.ndarray]
Term = Tuple[IndexLike, Union[float, np.ndarray]]


@dataclass(frozen=True)
class VariableBlock:
    name: str
    start: int
    size: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size)


@dataclass(frozen=True)
class ConstraintGroup:
    name: str
    relation: str  # "<=" or "="
    start: int
    size: int


@dataclass(frozen=True)
class LinearProgram:
    """Immutable LP: minimize c·x + c0 s.t. A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub."""

    c: np.ndarray
    c0: float
    lb: np.ndarray
    ub: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    blocks: Tuple[VariableBlock, ...]
    groups: Tuple[ConstraintGroup, ...]

    @property
    def n_vars(self) -> int:
        return int(self.c.size)

    @property
    def n_rows(self) -> int:
        return int(self.b_ub.size + self.b_eq.size)

    def block(self, name: str) -> np.ndarray:
        for b in self.blocks:
            if b.name == name:
                return b.indices
        raise KeyError(f"no variable block named {name!r}")

    def values(self, x: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(x)[self.block(name)]

    def var_name(self, i: int) -> str:
        for b in self.blocks:
            if b.start <= i < b.start + b.size:
                return b.name if b.size == 1 else f"{b.name}[{i - b.start}]"
        raise IndexError(i)

    def row_name(self, relation: str, i: int) -> str:
        for g in self.groups:
            if g.relation == relation and g.start <= i < g.start + g.size:
                return g.name if g.size == 1 else f"{g.name}[{i - g.start}]"
        raise IndexError(i)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ np.asarray(x) + self.c0)

    def scaled_objective(self, k: float) -> "LinearProgram":
        """Same feasible set, objective multiplied by ``k``."""
        return LinearProgram(
            c=self.c * k, c0=self.c0 * k, lb=self.lb, ub=self.ub,
            A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
            blocks=self.blocks, groups=self.groups,
        )


class LpBuilder:
    """Mutable assembly area for a :class:`LinearProgram`."""

    def __init__(self) -> None:
        self._blocks: List[VariableBlock] = []
        self._lb: List[np.ndarray] = []
        self._ub: List[np.ndarray] = []
        self._n = 0
        self._c_idx: List[np.ndarray] = []
        self._c_val: List[np.ndarray] = []
        self._c0 = 0.0
        self._rows = {"<=": ([], [], [], []), "=": ([], [], [], [])}  # rows, cols, vals, rhs
        self._row_count = {"<=": 0, "=": 0}
        self._groups: List[ConstraintGroup] = []

    def add_variables(self, name: str, size: int, lb=0.0, ub=np.inf) -> np.ndarray:
        if size < 0:
            raise ValueError(f"block {name!r}: negative size")
        if any(b.name == name for b in self._blocks):
            raise ValueError(f"variable block {name!r} already exists")
        lo = np.broadcast_to(np.asarray(lb, dtype=float), (size,)).copy()
        hi = np.broadcast_to(np.asarray(ub, dtype=float), (size,)).copy()
        if np.any(lo > hi):
            i = int(np.flatnonzero(lo > hi)[0])
            raise ValueError(f"block {name!r}: lower bound {lo[i]} exceeds upper bound {hi[i]} at {i}")
        block = VariableBlock(name=name, start=self._n, size=size)
        self._blocks.append(block)
        self._lb.append(lo)
        self._ub.append(hi)
        self._n += size
        return block.indices

    def add_constraints(self, name: str, terms: Sequence[Term], relation: str, rhs) -> None:
        """Add ``m`` rows: row i is Σ_terms coef[i]·x[idx[i]] (relation) rhs[i].

        A scalar index in a term broadcasts the same variable to every row.
        """
        if relation == ">=":
            terms = [(idx, -np.asarray(coef, dtype=float)) for idx, coef in terms]
            rhs = -np.asarray(rhs, dtype=float)
            relation = "<="
        if relation not in self._rows:
            raise ValueError(f"relation must be '<=', '>=' or '=', got {relation!r}")

        m = None
        for idx, _ in terms:
            if np.ndim(idx) == 1:
                m = len(idx) if m is None else m
                if len(idx) != m:
                    raise ValueError(f"constraint group {name!r}: term lengths disagree")
        if m is None:
            m = int(np.size(rhs))
        rhs_arr = np.broadcast_to(np.asarray(rhs, dtype=float), (m,)).copy()
        if m == 0:
            return

        rows, cols, vals, rhs_list = self._rows[relation]
        base = self._row_count[relation]
        local = np.arange(m)
        for idx, coef in terms:
            idx_arr = np.broadcast_to(np.asarray(idx, dtype=np.int64), (m,))
            if np.any(idx_arr < 0) or np.any(idx_arr >= self._n):
                raise ValueError(f"constraint group {name!r} references an unregistered variable")
            coef_arr = np.broadcast_to(np.asarray(coef, dtype=float), (m,))
            keep = coef_arr != 0.0
            rows.append(base + local[keep])
            cols.append(idx_arr[keep])
            vals.append(coef_arr[keep])
        rhs_list.append(rhs_arr)
        self._groups.append(ConstraintGroup(name=name, relation=relation, start=base, size=m))
        self._row_count[relation] += m

    def add_objective(self, idx: IndexLike, coef) -> None:
        idx_arr = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        self._c_idx.append(idx_arr)
        self._c_val.append(np.broadcast_to(np.asarray(coef, dtype=float), idx_arr.shape).copy())

    def add_objective_constant(self, value: float) -> None:
        self._c0 += float(value)

    def _matrix(self, relation: str) -> Tuple[sp.csr_matrix, np.ndarray]:
        rows, cols, vals, rhs = self._rows[relation]
        m = self._row_count[relation]
        if m == 0:
            return sp.csr_matrix((0, self._n)), np.zeros(0)
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, self._n)
        ).tocsr()
        return A, np.concatenate(rhs)

    def build(self) -> LinearProgram:
        c = np.zeros(self._n)
        for idx, val in zip(self._c_idx, self._c_val):
            np.add.at(c, idx, val)
        A_ub, b_ub = self._matrix("<=")
        A_eq, b_eq = self._matrix("=")
        lb = np.concatenate(self._lb) if self._lb else np.zeros(0)
        ub = np.concatenate(self._ub) if self._ub else np.zeros(0)
        for arr in (c, lb, ub, b_ub, b_eq):
            arr.setflags(write=False)
        return LinearProgram(
            c=c, c0=self._c0, lb=lb, ub=ub,
            A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            blocks=tuple(self._blocks), groups=tuple(self._groups),
        )


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    message: str = ""
    backend: str = ""
    duals_ub: Optional[np.ndarray] = None
    duals_eq: Optional[np.ndarray] = None
    duals_lower: Optional[np.ndarray] = None
    duals_upper: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def has_duals(self) -> bool:
        return self.duals_ub is not None and self.duals_eq is not None


Backend = Callable[[LinearProgram, float], LpSolution]
BACKENDS: Dict[str, Backend] = {}
DEFAULT_BACKEND = "highs-ds"


def register_backend(name: str, fn: Backend) -> None:
    BACKENDS[name] = fn


_SCIPY_STATUS = {0: "optimal", 1: "numerical_failure", 2: "infeasible", 3: "unbounded", 4: "numerical_failure"}


def _scipy_highs(method: str) -> Backend:
    def run(lp: LinearProgram, tol: float) -> LpSolution:
        bounds = np.column_stack([lp.lb, lp.ub]) if lp.n_vars else None
        res = linprog(
            lp.c,
            A_ub=lp.A_ub if lp.b_ub.size else None,
            b_ub=lp.b_ub if lp.b_ub.size else None,
            A_eq=lp.A_eq if lp.b_eq.size else None,
            b_eq=lp.b_eq if lp.b_eq.size else None,
            bounds=bounds,
            method=method,
            options={
                "primal_feasibility_tolerance": min(1e-7, tol),
                "dual_feasibility_tolerance": min(1e-7, tol),
                "presolve": True,
            },
        )
        status = _SCIPY_STATUS.get(int(res.status), "numerical_failure")
        sol = LpSolution(
            status=status,
            message=str(res.message),
            backend=method,
            iterations=int(getattr(res, "nit", 0) or 0),
        )
        if status == "optimal":
            sol.x = np.asarray(res.x, dtype=float)
            sol.objective = float(res.fun) + lp.c0
            for attr, key in (("duals_ub", "ineqlin"), ("duals_eq", "eqlin"), ("duals_lower", "lower"), ("duals_upper", "upper")):
                part = getattr(res, key, None)
                marg = getattr(part, "marginals", None) if part is not None else None
                if marg is not None:
                    setattr(sol, attr, np.asarray(marg, dtype=float))
            if sol.duals_ub is None and lp.b_ub.size == 0:
                sol.duals_ub = np.zeros(0)
            if sol.duals_eq is None and lp.b_eq.size == 0:
                sol.duals_eq = np.zeros(0)
        return sol

    return run


register_backend("highs-ds", _scipy_highs("highs-ds"))
register_backend("highs-ipm", _scipy_highs("highs-ipm"))
register_backend("highs", _scipy_highs("highs"))


def solve(lp: LinearProgram, tol: float = DEFAULT_TOL, backend: str = DEFAULT_BACKEND) -> LpSolution:
    """Solve ``lp`` and certify optimal answers with :func:`verify_solution`.

    An optimal answer failing verification is downgraded to ``numerical_failure``.
    """
    fn = BACKENDS.get(backend)
    if fn is None:
        raise SteamflexError(f"unknown LP backend {backend!r} (available: {', '.join(sorted(BACKENDS))})")
    sol = fn(lp, tol)
    vprint(f"[solve] backend={backend} vars={lp.n_vars} rows={lp.n_rows} status={sol.status}")
    if sol.is_optimal:
        diag = verify_solution(lp, sol, tol, check_duals=False)
        if not diag.passed:
            sol.status = "numerical_failure"
            sol.message = f"solution failed verification: {diag.summary()}"
    return sol


@dataclass
class LpDiagnostics:
    max_primal_violation: float
    worst_primal: str
    max_dual_violation: Optional[float] = None
    complementarity: Optional[float] = None
    tol: float = DEFAULT_TOL
    messages: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        checks = [self.max_primal_violation]
        if self.max_dual_violation is not None:
            checks.append(self.max_dual_violation)
        if self.complementarity is not None:
            checks.append(self.complementarity)
        return all(v <= self.tol for v in checks)

    def summary(self) -> str:
        parts = [f"primal={self.max_primal_violation:.3g} ({self.worst_primal or '-'})"]
        if self.max_dual_violation is not None:
            parts.append(f"dual={self.max_dual_violation:.3g}")
        if self.complementarity is not None:
            parts.append(f"complementarity={self.complementarity:.3g}")
        return ", ".join(parts)


def _worst(values: np.ndarray) -> Tuple[float, int]:
    if values.size == 0:
        return 0.0, -1
    i = int(np.argmax(values))
    return float(max(values[i], 0.0)), i


def verify_solution(lp: LinearProgram, sol: LpSolution, tol: float = DEFAULT_TOL, check_duals: bool = True) -> LpDiagnostics:
    """Independent feasibility and optimality residuals of ``sol``.

    Primal violations are relative to (1 + |rhs|). Dual residuals are relative to
    (1 + max|c|); complementarity products are relative to (1 + |objective|).
    """
    if sol.x is None:
        return LpDiagnostics(max_primal_violation=np.inf, worst_primal="no primal solution", tol=tol)
    x = np.asarray(sol.x, dtype=float)

    candidates: List[Tuple[float, str]] = []
    if lp.b_ub.size:
        v, i = _worst((lp.A_ub @ x - lp.b_ub) / (1.0 + np.abs(lp.b_ub)))
        candidates.append((v, lp.row_name("<=", i)))
    if lp.b_eq.size:
        v, i = _worst(np.abs(lp.A_eq @ x - lp.b_eq) / (1.0 + np.abs(lp.b_eq)))
        candidates.append((v, lp.row_name("=", i)))
    finite_lb = np.isfinite(lp.lb)
    finite_ub = np.isfinite(lp.ub)
    lo_v = np.where(finite_lb, (np.where(finite_lb, lp.lb, 0.0) - x) / (1.0 + np.abs(np.where(finite_lb, lp.lb, 0.0))), 0.0)
    hi_v = np.where(finite_ub, (x - np.where(finite_ub, lp.ub, 0.0)) / (1.0 + np.abs(np.where(finite_ub, lp.ub, 0.0))), 0.0)
    for arr, label in ((lo_v, "lower bound"), (hi_v, "upper bound")):
        v, i = _worst(arr)
        if i >= 0:
            candidates.append((v, f"{label} of {lp.var_name(i)}"))

    worst_v, worst_name = 0.0, ""
    for v, name in candidates:
        if v > worst_v:
            worst_v, worst_name = v, name
    diag = LpDiagnostics(max_primal_violation=worst_v, worst_primal=worst_name if worst_v > tol else "", tol=tol)
    if worst_v > tol:
        diag.messages.append(f"primal violation {worst_v:.3g} at {worst_name}")

    if not (check_duals and sol.has_duals):
        return diag

    y_ub = sol.duals_ub if sol.duals_ub is not None else np.zeros(lp.b_ub.size)
    y_eq = sol.duals_eq if sol.duals_eq is not None else np.zeros(lp.b_eq.size)
    z_l = sol.duals_lower if sol.duals_lower is not None else np.zeros(lp.n_vars)
    z_u = sol.duals_upper if sol.duals_upper is not None else np.zeros(lp.n_vars)

    scale = 1.0 + float(np.max(np.abs(lp.c))) if lp.n_vars else 1.0
    stationarity = lp.c - lp.A_ub.T @ y_ub - lp.A_eq.T @ y_eq - z_l - z_u
    sign = np.concatenate([np.maximum(y_ub, 0.0), np.maximum(-z_l, 0.0), np.maximum(z_u, 0.0)])
    dual_v = max(float(np.max(np.abs(stationarity), initial=0.0)), float(np.max(sign, initial=0.0))) / scale
    diag.max_dual_violation = dual_v
    if dual_v > tol:
        diag.messages.append(f"dual violation {dual_v:.3g}")

    obj_scale = 1.0 + abs(sol.objective if sol.objective is not None else lp.objective_value(x))
    slack_ub = lp.b_ub - lp.A_ub @ x if lp.b_ub.size else np.zeros(0)
    cs = [np.abs(y_ub * slack_ub)]
    cs.append(np.where(finite_lb, np.abs(z_l * (x - np.where(finite_lb, lp.lb, 0.0))), 0.0))
    cs.append(np.where(finite_ub, np.abs(z_u * (np.where(finite_ub, lp.ub, 0.0) - x)), 0.0))
    comp = max(float(np.max(a, initial=0.0)) for a in cs) / obj_scale
    diag.complementarity = comp
    if comp > tol:
        diag.messages.append(f"complementary slackness residual {comp:.3g}")
    return diag


def _fmt(v: float) -> str:
    if np.isposinf(v):
        return "+inf"
    if np.isneginf(v):
        return "-inf"
    return repr(float(v))


def dump_lp(lp: LinearProgram, out: Union[str, Path, TextIO]) -> None:
    """Write ``lp`` as plain text for external cross-checking.

    Format::

        VARIABLES <n>
        <name> <lb> <ub> <objective coefficient>
        OBJECTIVE_CONSTANT <c0>
        ROWS <m>
        <row name> <relation> <rhs> : <coef> <var> [<coef> <var> ...]
    """
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8") as f:
            dump_lp(lp, f)
        return

    out.write(f"VARIABLES {lp.n_vars}\n")
    for i in range(lp.n_vars):
        out.write(f"{lp.var_name(i)} {_fmt(lp.lb[i])} {_fmt(lp.ub[i])} {_fmt(lp.c[i])}\n")
    out.write(f"OBJECTIVE_CONSTANT {_fmt(lp.c0)}\n")
    out.write(f"ROWS {lp.n_rows}\n")
    for relation, A, b in (("<=", lp.A_ub, lp.b_ub), ("=", lp.A_eq, lp.b_eq)):
        for i in range(b.size):
            start, end = A.indptr[i], A.indptr[i + 1]
            coeffs = " ".join(f"{_fmt(A.data[k])} {lp.var_name(int(A.indices[k]))}" for k in range(start, end))
            out.write(f"{lp.row_name(relation, i)} {relation} {_fmt(b[i])} : {coeffs}\n")
