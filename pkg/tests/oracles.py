"""Direct-formula reference implementations used only by the tests.

Plain Python loops over lists (``math.fsum``, ``statistics.median``), kept
independent of the vectorized code under test.
"""

import itertools
import math
import statistics

EPS = 1e-6


def mean(u):
    return math.fsum(u) / len(u)


def utilitarian(u):
    return math.fsum(u)


def relative_range(u):
    return -(max(u) - min(u)) / mean(u)


def relative_mean_deviation(u):
    m = mean(u)
    return -math.fsum(abs(x - m) for x in u) / m


def coefficient_of_variation(u):
    m = mean(u)
    return -math.sqrt(math.fsum((x - m) ** 2 for x in u) / len(u)) / m


def gini(u):
    n = len(u)
    total = math.fsum(abs(x - y) for x in u for y in u)
    return 1.0 - total / (2.0 * mean(u) * n * n)


def hoover(u):
    m = mean(u)
    return -math.fsum(abs(x - m) for x in u) / (2.0 * len(u) * m)


def mcloone(u):
    med = statistics.median(u)
    below = [x for x in u if x <= med]
    return math.fsum(below) / (len(below) * med)


def maximin(u):
    return min(u)


def alpha_fairness(u, alpha, eps=EPS):
    if alpha > 1 or any(x <= 0 for x in u):
        u = [max(x, eps) for x in u]
    return math.fsum(x ** (1.0 - alpha) for x in u) / (1.0 - alpha)


def proportional_fairness(u, eps=EPS):
    return math.fsum(math.log(max(x, eps)) for x in u)


def threshold(u, delta):
    lo = min(u)
    return (len(u) - 1) * delta + math.fsum(max(x - delta, lo) for x in u)


def kalai_smorodinsky(u, u_max, tol=1e-9):
    ratios = [x / m for x, m in zip(u, u_max)]
    beta = ratios[0]
    if all(abs(r - beta) <= tol * max(abs(beta), 1e-300) for r in ratios) and -tol <= beta <= 1 + tol:
        return math.fsum(u)
    return 0.0


def leximax_compare(a, b):
    sa, sb = sorted(a), sorted(b)
    return (sa > sb) - (sa < sb)


def grid_points(requests, budget, step):
    """All lattice allocations ``k * step`` inside the feasible set."""
    ranges = [range(int(math.floor(r / step + 1e-9)) + 1) for r in requests]
    units = math.floor(budget / step + 1e-9)
    for k in itertools.product(*ranges):
        if sum(k) <= units:
            yield [ki * step for ki in k]
