"""Budget-constrained allocation: maximize W(u) with u_i = p_i d_i.

The feasible set is ``0 <= d_i <= r_i`` and ``sum(d) <= B``.  Concave
welfare families have exact specialised solvers (greedy or water-filling);
everything else goes through a projected-subgradient heuristic.  A lattice
brute-force oracle is provided for small instances.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from . import kernels
from .swf import Family, SWFError, SwfSpec, UnsupportedFamilyError, evaluate

FEAS_TOL = 1e-9
MAX_ORACLE_PLAYERS = 5
MAX_GRID_POINTS = 10**7


class AllocationError(ValueError):
    pass


class EmptyProblemError(AllocationError):
    pass


class GridTooLargeError(AllocationError):
    pass


class DegeneratePlayerWarning(UserWarning):
    """Some applicant has zero repay probability but a positive request.

    Their utility is 0 whatever they receive, so the maximin value is 0; the
    solver gives them nothing and optimizes over the remaining applicants.
    """


@dataclass(frozen=True)
class AllocationProblem:
    p_hat: np.ndarray
    requests: np.ndarray
    budget: float

    def __post_init__(self):
        p = np.array(self.p_hat, dtype=float).ravel()
        r = np.array(self.requests, dtype=float).ravel()
        if p.shape != r.shape:
            raise AllocationError(f"p_hat has {p.size} entries but requests has {r.size}")
        if p.size == 0:
            raise AllocationError("allocation problem needs at least one applicant")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise AllocationError("p_hat entries must lie in [0, 1]")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise AllocationError("requests must be finite and nonnegative")
        budget = float(self.budget)
        if not math.isfinite(budget) or budget < 0:
            raise AllocationError(f"budget must be finite and nonnegative, got {self.budget}")
        p.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "requests", r)
        object.__setattr__(self, "budget", budget)

    @property
    def n(self) -> int:
        return self.p_hat.size

    @property
    def slack(self) -> bool:
        """True when the budget covers every request."""
        return self.budget >= self.requests.sum()

    def utility_caps(self) -> np.ndarray:
        """Best utility each applicant could get if the others were ignored."""
        return self.p_hat * np.minimum(self.requests, self.budget)


@dataclass
class AllocationSolution:
    granted: np.ndarray
    utilities: np.ndarray
    objective: float
    solver: str
    iterations: int = 0
    converged: bool = True
    degenerate: tuple[int, ...] = ()
    beta: float | None = None
    grid_points: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def total_granted(self) -> float:
        return float(self.granted.sum())


def check_feasible(problem: AllocationProblem, d: np.ndarray) -> None:
    r, B = problem.requests, problem.budget
    if np.any(d < -FEAS_TOL) or np.any(d > r + FEAS_TOL):
        raise AssertionError("allocation violates 0 <= d_i <= r_i")
    if d.sum() > B + FEAS_TOL * max(1.0, B):
        raise AssertionError(f"allocation spends {d.sum()!r} over budget {B!r}")


def _objective(spec: SwfSpec, u: np.ndarray, u_max=None) -> float:
    if spec.family is Family.LEXIMAX:
        return float(u.min())
    if u_max is not None:
        # zero-cap players always get zero utility, so they sit on every ray
        keep = u_max > 0
        if not keep.any():
            return 0.0
        u, u_max = u[keep], u_max[keep]
    try:
        return evaluate(spec, u, u_max=u_max)
    except SWFError:
        return -math.inf


def _finish(problem, d, spec, solver, **kw) -> AllocationSolution:
    d = np.clip(np.asarray(d, dtype=float), 0.0, problem.requests)
    check_feasible(problem, d)
    u = problem.p_hat * d
    u_max = problem.utility_caps() if spec.family is Family.KALAI_SMORODINSKY else None
    return AllocationSolution(d, u, _objective(spec, u, u_max), solver, **kw)


def _degenerate(problem: AllocationProblem) -> tuple[int, ...]:
    bad = np.flatnonzero((problem.p_hat == 0) & (problem.requests > 0))
    if bad.size:
        warnings.warn(
            f"applicants {bad.tolist()} have zero repay probability; maximin value is 0 "
            "and they are excluded from water-filling",
            DegeneratePlayerWarning,
            stacklevel=3,
        )
    return tuple(int(i) for i in bad)


# --- exact solvers ---------------------------------------------------------

def solve_utilitarian(problem: AllocationProblem) -> AllocationSolution:
    """Fractional-knapsack greedy: fund applicants by descending ``p_hat``.

    Ties in ``p_hat`` go to the lower index first; the last grant may be
    partial.
    """
    spec = SwfSpec(Family.UTILITARIAN)
    if problem.slack:
        return _finish(problem, problem.requests.copy(), spec, "utilitarian-greedy")
    d = np.zeros(problem.n)
    left = problem.budget
    steps = 0
    for i in np.argsort(-problem.p_hat, kind="stable"):
        if left <= 0:
            break
        d[i] = min(problem.requests[i], left)
        left -= d[i]
        steps += 1
    return _finish(problem, d, spec, "utilitarian-greedy", iterations=steps)


def water_fill(coef: np.ndarray, caps: np.ndarray, target: float):
    """Solve ``sum_i min(caps_i, coef_i * mu) = target`` for the level ``mu``.

    The left side is piecewise linear in ``mu`` with kinks at
    ``caps_i / coef_i``; a binary search over the sorted kinks finds the
    active segment and the level is then solved exactly on it.  Entries with
    ``coef_i == 0`` receive nothing.  Returns ``(d, mu, probes)``.
    """
    coef = np.asarray(coef, dtype=float)
    caps = np.asarray(caps, dtype=float)
    live = coef > 0
    d = np.zeros_like(caps)
    if target <= 0 or not live.any():
        return d, 0.0, 0
    if caps[live].sum() <= target:
        d[live] = caps[live]
        return d, math.inf, 0
    c, r = coef[live], caps[live]
    kinks = r / c
    order = np.argsort(kinks, kind="stable")
    ks, cs, rs = kinks[order], c[order], r[order]
    cum_caps = np.concatenate(([0.0], np.cumsum(rs)))
    tail_coef = cs[::-1].cumsum()[::-1]

    def spent(k):  # total at mu = ks[k]: first k+1 capped, rest at coef * mu
        rest = tail_coef[k + 1] if k + 1 < ks.size else 0.0
        return cum_caps[k + 1] + ks[k] * rest

    lo, hi, probes = -1, ks.size - 1, 0  # spent(hi) >= target by the slack check
    while hi - lo > 1:
        mid = (lo + hi) // 2
        probes += 1
        if spent(mid) >= target:
            hi = mid
        else:
            lo = mid
    mu = (target - cum_caps[hi]) / tail_coef[hi]
    d[live] = np.minimum(r, c * mu)
    # rounding can overshoot by an ulp or two
    over = d.sum() - target
    if over > 0:
        d *= target / d.sum()
    return d, float(mu), probes


def _water_fill_solve(problem, coef, spec, solver):
    if problem.slack:
        return _finish(problem, problem.requests.copy(), spec, solver)
    bad = _degenerate(problem)
    coef = np.where(problem.p_hat > 0, coef, 0.0)
    target = min(problem.budget, problem.requests.sum())
    d, mu, probes = water_fill(coef, problem.requests, target)
    sol = _finish(problem, d, spec, solver, iterations=probes, degenerate=bad)
    sol.extra["level"] = mu
    return sol


def solve_maximin(problem: AllocationProblem) -> AllocationSolution:
    """Raise a common utility level ``t`` with ``d_i = min(r_i, t / p_i)``
    until the budget binds."""
    p = problem.p_hat
    with np.errstate(divide="ignore"):
        coef = np.where(p > 0, 1.0 / np.where(p > 0, p, 1.0), 0.0)
    return _water_fill_solve(problem, coef, SwfSpec(Family.MAXIMIN), "maximin-waterfill")


def solve_proportional_fairness(problem: AllocationProblem) -> AllocationSolution:
    """Maximize ``sum log(p_i d_i)``.  The log separates, so the optimal
    ``d`` is an equal cut ``min(r_i, t)`` that does not depend on ``p_hat``."""
    coef = np.ones(problem.n)
    return _water_fill_solve(
        problem, coef, SwfSpec(Family.PROPORTIONAL), "proportional-waterfill"
    )


def solve_alpha_fairness(problem: AllocationProblem, alpha: float) -> AllocationSolution:
    """KKT water-filling for alpha fairness.

    Stationarity gives ``d_i = min(r_i, (p_i^(1-alpha) / lam)^(1/alpha))``,
    i.e. ``d_i = min(r_i, p_i^((1-alpha)/alpha) * mu)`` for a common level
    ``mu``.  The objective is concave for every ``alpha > 0``, so the
    budget-exhausting level is the global optimum.
    """
    spec = SwfSpec(Family.ALPHA, alpha=alpha)
    if alpha == 0:
        sol = solve_utilitarian(problem)
        sol.objective = _objective(spec, sol.utilities)
        return sol
    p = problem.p_hat
    safe = np.where(p > 0, p, 1.0)
    coef = np.where(p > 0, safe ** ((1.0 - alpha) / alpha), 0.0)
    return _water_fill_solve(problem, coef, spec, f"alpha-waterfill(alpha={alpha:g})")


def solve_leximax(problem: AllocationProblem) -> AllocationSolution:
    """Progressive filling on the common utility level.

    All unfrozen applicants rise together; an applicant freezes when its
    request is fully granted, and filling stops when the budget runs out.
    The result is leximax-optimal for a single budget constraint.
    """
    spec = SwfSpec(Family.LEXIMAX)
    if problem.slack:
        return _finish(problem, problem.requests.copy(), spec, "leximax-progressive")
    bad = _degenerate(problem)
    p, r = problem.p_hat, problem.requests
    active = (p > 0) & (r > 0)
    d = np.zeros(problem.n)
    idx = np.flatnonzero(active)
    cap_u = p[idx] * r[idx]
    order = idx[np.argsort(cap_u, kind="stable")]
    rate = float(np.sum(1.0 / p[idx]))  # budget needed per unit of level
    level, left, rounds = 0.0, problem.budget, 0
    frozen = np.zeros(problem.n, dtype=bool)
    for i in order:
        cost = (p[i] * r[i] - level) * rate
        if cost >= left:
            level += left / rate
            left = 0.0
            break
        left -= cost
        level = p[i] * r[i]
        d[i] = r[i]
        frozen[i] = True
        rate -= 1.0 / p[i]
        rounds += 1
    rest = active & ~frozen
    d[rest] = np.minimum(r[rest], level / p[rest])
    if d.sum() > problem.budget:
        d *= problem.budget / d.sum()
    sol = _finish(problem, d, spec, "leximax-progressive", iterations=rounds, degenerate=bad)
    sol.extra["level"] = level
    return sol


def solve_kalai_smorodinsky(problem: AllocationProblem) -> AllocationSolution:
    """Give everyone the same fraction ``beta`` of their best attainable grant.

    An applicant's best case ignoring the others is ``min(r_i, B)``; the
    largest common fraction that fits the budget is
    ``beta = min(1, B / sum_i min(r_i, B))``.
    """
    if not np.any(problem.requests > 0):
        raise EmptyProblemError("Kalai-Smorodinsky needs at least one positive request")
    best = np.minimum(problem.requests, problem.budget)
    beta = min(1.0, problem.budget / best.sum()) if problem.budget > 0 else 0.0
    d = beta * best
    if d.sum() > problem.budget:
        d *= problem.budget / d.sum()
    return _finish(
        problem, d, SwfSpec(Family.KALAI_SMORODINSKY), "kalai-smorodinsky", beta=beta
    )


# --- generic heuristic -----------------------------------------------------

def project_feasible(y: np.ndarray, caps: np.ndarray, budget: float,
                     tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Euclidean projection onto ``{0 <= d <= caps, sum d <= budget}``.

    Clip to the box; if that overspends, bisect on a uniform downward shift
    ``tau`` so that ``sum clip(y - tau, 0, caps) = budget``.
    """
    d = np.clip(y, 0.0, caps)
    if d.sum() <= budget:
        return d
    lo, hi = 0.0, float(np.max(y))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = np.clip(y - mid, 0.0, caps).sum()
        if s > budget:
            lo = mid
        else:
            hi = mid
            if budget - s <= tol * max(1.0, budget):
                break
    return np.clip(y - hi, 0.0, caps)


def welfare_gradient(spec: SwfSpec, u: np.ndarray) -> np.ndarray:
    """A (super)gradient of ``W`` with respect to ``u``.

    Clamped families use the derivative at the clamped value, which keeps a
    useful ascent direction at ``u_i = 0``.  Kalai-Smorodinsky is flat almost
    everywhere and gets a zero gradient.
    """
    fam = spec.family
    n = u.size
    g = np.zeros(n)
    if fam is Family.UTILITARIAN:
        return np.ones(n)
    if fam is Family.MAXIMIN:
        g[np.argmin(u)] = 1.0
        return g
    if fam is Family.ALPHA:
        return np.maximum(u, spec.eps) ** (-spec.alpha)
    if fam is Family.PROPORTIONAL:
        return 1.0 / np.maximum(u, spec.eps)
    if fam is Family.THRESHOLD:
        m = int(np.argmin(u))
        above = u - spec.delta > u[m]
        g[above] = 1.0
        g[m] += np.count_nonzero(~above)
        return g
    if fam is Family.KALAI_SMORODINSKY:
        return g
    mean = u.mean()
    if mean == 0:
        return np.ones(n)
    if fam is Family.RELATIVE_RANGE:
        spread = u.max() - u.min()
        g[np.argmax(u)] -= 1.0 / mean
        g[np.argmin(u)] += 1.0 / mean
        return g + spread / (mean**2 * n)
    if fam in (Family.RELATIVE_MEAN_DEVIATION, Family.HOOVER):
        sgn = np.sign(u - mean)
        s = np.abs(u - mean).sum()
        g = -(sgn - sgn.mean()) / mean + s / (mean**2 * n)
        return g / (2 * n) if fam is Family.HOOVER else g
    if fam is Family.COEFFICIENT_OF_VARIATION:
        sd = u.std()
        if sd == 0:
            return g
        return -(u - mean) / (n * sd * mean) + sd / (mean**2 * n)
    if fam is Family.GINI:
        diff = np.sign(u[:, None] - u[None, :]).sum(axis=1)
        pairs = np.abs(u[:, None] - u[None, :]).sum()
        return -2.0 * diff / (2 * mean * n * n) + pairs / (2 * mean**2 * n**3)
    if fam is Family.MCLOONE:
        med = np.median(u)
        if med == 0:
            return np.ones(n)
        below = u <= med
        k = below.sum()
        w = u[below].sum() / (k * med)
        g[below] = 1.0 / (k * med)
        srt = np.argsort(u, kind="stable")
        mids = [srt[n // 2]] if n % 2 else [srt[n // 2 - 1], srt[n // 2]]
        for m in mids:
            g[m] -= w / med / len(mids)
        return g
    raise UnsupportedFamilyError(f"no gradient for {fam.value}")


def solve_generic(problem: AllocationProblem, spec: SwfSpec, restarts: int = 5,
                  max_iter: int = 500, seed: int = 0) -> AllocationSolution:
    """Multi-start projected subgradient ascent over the feasible polytope.

    Steps have length ``a / sqrt(k)`` along the normalized subgradient with
    ``a = max(r) / 10``.  The best point over all restarts is returned (ties
    go to the earlier restart).  Only a heuristic optimum for nonconcave
    families such as threshold or McLoone.
    """
    if spec.family is Family.LEXIMAX:
        raise UnsupportedFamilyError("leximax has no scalar objective; use solve_leximax")
    p, r, B = problem.p_hat, problem.requests, problem.budget
    u_max = problem.utility_caps() if spec.family is Family.KALAI_SMORODINSKY else None
    a = float(r.max()) / 10.0 if r.max() > 0 else 0.0
    rng = np.random.default_rng(seed)
    window = max(1, max_iter // 10)

    best_d, best_val, total_iter = np.zeros(problem.n), -math.inf, 0
    converged = True
    for _ in range(max(1, restarts)):
        d = project_feasible(rng.uniform(0.0, r), r, B)
        val = _objective(spec, p * d, u_max)
        run_best, run_d, history = val, d, [val]
        for k in range(1, max_iter + 1):
            g = p * welfare_gradient(spec, p * d)
            norm = np.linalg.norm(g)
            total_iter += 1
            if norm == 0 or a == 0:
                break
            d = project_feasible(d + (a / math.sqrt(k)) * g / norm, r, B)
            val = _objective(spec, p * d, u_max)
            if val > run_best:
                run_best, run_d = val, d
            history.append(run_best)
        if len(history) > window:
            gain = history[-1] - history[-1 - window]
            converged &= gain <= 1e-8 * max(1.0, abs(history[-1]))
        if run_best > best_val:
            best_val, best_d = run_best, run_d
    return _finish(
        problem, best_d, spec, f"projected-subgradient({spec})",
        iterations=total_iter, converged=bool(converged),
    )


# --- brute-force oracle ----------------------------------------------------

def count_grid_points(kmax: ArrayLike, budget_units: int) -> int:
    """Number of lattice points with ``0 <= k_i <= kmax_i`` and ``sum k <= budget_units``."""
    ways = np.zeros(budget_units + 1)
    ways[0] = 1.0  # ways[s] = points whose coordinates sum to s
    for km in kmax:
        c = np.concatenate(([0.0], np.cumsum(ways)))
        lo = np.maximum(np.arange(budget_units + 1) - int(km), 0)
        ways = c[1:] - c[lo]
    return int(round(ways.sum()))


def brute_force_oracle(problem: AllocationProblem, spec: SwfSpec, grid_step: float,
                       max_points: int = MAX_GRID_POINTS, backend: str | None = None,
                       ) -> AllocationSolution:
    """Exact optimum over the lattice ``{0, step, 2 step, ...}^n`` inside the
    feasible set.  Meant as a test oracle for ``n <= 5``."""
    if problem.n > MAX_ORACLE_PLAYERS:
        raise AllocationError(f"oracle supports at most {MAX_ORACLE_PLAYERS} applicants")
    if not grid_step > 0:
        raise AllocationError("grid step must be positive")
    kmax = np.floor(problem.requests / grid_step + 1e-9).astype(np.int64)
    budget_units = int(math.floor(problem.budget / grid_step + 1e-9))
    budget_units = min(budget_units, int(kmax.sum()))
    if budget_units > 50 * max_points:
        raise GridTooLargeError(f"budget spans {budget_units} grid steps (limit {max_points} points)")
    points = count_grid_points(kmax, budget_units)
    if points > max_points:
        raise GridTooLargeError(f"grid has {points} feasible points (limit {max_points})")
    u_max = problem.utility_caps() if spec.family is Family.KALAI_SMORODINSKY else None
    k, _, seen = kernels.grid_argmax(
        problem.p_hat, kmax, budget_units, grid_step,
        kernels.FAMILY_CODES[spec.family],
        alpha=spec.alpha or 0.0, delta=spec.delta or 0.0, eps=spec.eps,
        umax=u_max, backend=backend,
    )
    if k is None:
        raise AllocationError(f"{spec} is undefined at every grid point")
    d = k * grid_step
    return _finish(problem, d, spec, "grid-oracle", iterations=seen, grid_points=seen)


# --- dispatch and file formats ---------------------------------------------

def solve(problem: AllocationProblem, spec: SwfSpec | str, **generic_kw) -> AllocationSolution:
    """Pick the exact solver for ``spec`` if one exists, else the heuristic."""
    if isinstance(spec, str):
        spec = SwfSpec.parse(spec)
    fam = spec.family
    if fam is Family.UTILITARIAN:
        return solve_utilitarian(problem)
    if fam is Family.THRESHOLD and spec.delta == 0:
        sol = solve_utilitarian(problem)
        sol.objective = _objective(spec, sol.utilities)
        return sol
    if fam is Family.MAXIMIN:
        return solve_maximin(problem)
    if fam is Family.LEXIMAX:
        return solve_leximax(problem)
    if fam is Family.ALPHA:
        return solve_alpha_fairness(problem, spec.alpha)
    if fam is Family.PROPORTIONAL:
        return solve_proportional_fairness(problem)
    if fam is Family.KALAI_SMORODINSKY:
        return solve_kalai_smorodinsky(problem)
    return solve_generic(problem, spec, **generic_kw)


def read_problem_csv(path: str | Path, budget: float) -> tuple[list[str], AllocationProblem]:
    """Read ``id,pHat,request`` rows."""
    ids, p, r = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "pHat", "request"} - set(reader.fieldnames or ())
        if missing:
            raise AllocationError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                p.append(float(row["pHat"]))
                r.append(float(row["request"]))
            except (TypeError, ValueError):
                raise AllocationError(f"{path}:{lineno}: non-numeric pHat/request") from None
            ids.append(row["id"])
    return ids, AllocationProblem(p, r, budget)


def write_solution_csv(path: str | Path, ids: list[str], solution: AllocationSolution,
                       header_lines: list[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "granted", "utility"])
        for i, d, u in zip(ids, solution.granted, solution.utilities):
            w.writerow([i, repr(float(d)), repr(float(u))])
