"""Grid-resolution comparison of exact solvers against the lattice oracle.

The continuous optimum ``d*`` dominates every grid point, and rounding
``d*`` down to the grid gives a feasible grid point.  So the grid optimum
must lie between ``W(floor(d*))`` and ``W(d*)``; that sandwich is the
"within grid resolution" test.  Leximax uses the same sandwich in the
leximax order.  Kalai-Smorodinsky is discontinuous (0 off the ray), so only
the upper side and the ray property are checked.
"""

import math

import numpy as np

from swfopt import alloc, swf
from swfopt.swf import Family, SwfSpec

SOLVER_SPECS = ("utilitarian", "maximin", "leximax", "alpha:alpha=0.5", "alpha:alpha=2",
                "proportional", "kalai-smorodinsky")
TOL = 1e-9


def random_instance(rng, max_n=4, max_points=alloc.MAX_GRID_POINTS):
    """Random problem whose oracle grid (step 0.01 max r) fits the point limit."""
    while True:
        n = int(rng.integers(1, max_n + 1))
        p = rng.uniform(0.05, 1.0, n)
        r = rng.uniform(1.0, 100.0, n)
        budget = float(rng.uniform(0.1, 0.9) * r.sum())
        prob = alloc.AllocationProblem(p, r, budget)
        step = 0.01 * float(r.max())
        kmax = np.floor(r / step + 1e-9).astype(np.int64)
        units = min(int(math.floor(budget / step + 1e-9)), int(kmax.sum()))
        if alloc.count_grid_points(kmax, units) <= max_points:
            return prob, step


def floor_to_grid(d, step):
    return np.floor(d / step + 1e-9) * step


def _w(spec, prob, d):
    u = prob.p_hat * d
    if spec.family is Family.KALAI_SMORODINSKY:
        return swf.kalai_smorodinsky(u, prob.utility_caps())
    return swf.evaluate(spec, u)


def check_against_oracle(prob, spec_text, step):
    """Return a list of violated conditions (empty when the solver passes)."""
    spec = SwfSpec.parse(spec_text)
    sol = alloc.solve(prob, spec)
    ref = alloc.brute_force_oracle(prob, spec, step)
    low = floor_to_grid(sol.granted, step)
    problems = []
    if spec.family is Family.LEXIMAX:
        u_star, u_ref, u_low = (prob.p_hat * d for d in (sol.granted, ref.granted, low))
        if swf.leximax_compare(u_star, u_ref, tol=TOL * max(1.0, u_star.max())) < 0:
            problems.append("grid point beats the leximax solution")
        if swf.leximax_compare(u_ref, u_low, tol=TOL) < 0:
            problems.append("oracle worse than the rounded solution")
        return problems
    w_star, w_ref = _w(spec, prob, sol.granted), ref.objective
    scale = max(1.0, abs(w_star))
    if w_ref > w_star + TOL * scale:
        problems.append(f"oracle {w_ref!r} beats solver {w_star!r}")
    if spec.family is Family.KALAI_SMORODINSKY:
        ratios = sol.utilities / prob.utility_caps()
        if np.ptp(ratios) > 1e-9 * max(ratios.max(), 1e-300) or abs(ratios[0] - sol.beta) > 1e-9:
            problems.append("K-S solution is off the ray")
        return problems
    w_low = _w(spec, prob, low)
    if w_ref < w_low - TOL * scale:
        problems.append(f"oracle {w_ref!r} below rounded solution {w_low!r}")
    return problems
