"""Pure numpy implementation of the grid-oracle kernel.

Mirrors ``swfopt._grid.grid_argmax``: same lexicographic enumeration order,
same first-best tie rule, same family codes.  For the inequality indices
the two backends sum in different orders, so exact ties can resolve to
different (equally good) points.  Candidates
are scored in blocks (one block per value of the first coordinate) with the
row-wise SWF formulas from :mod:`swfopt.swf`.
"""

from __future__ import annotations

import numpy as np

from .swf import Family, SwfSpec, welfare_rows

FAMILY_CODES = {
    Family.UTILITARIAN: 0,
    Family.RELATIVE_RANGE: 1,
    Family.RELATIVE_MEAN_DEVIATION: 2,
    Family.COEFFICIENT_OF_VARIATION: 3,
    Family.GINI: 4,
    Family.HOOVER: 5,
    Family.MCLOONE: 6,
    Family.MAXIMIN: 7,
    Family.ALPHA: 8,
    Family.PROPORTIONAL: 9,
    Family.KALAI_SMORODINSKY: 10,
    Family.THRESHOLD: 11,
    Family.LEXIMAX: 12,
}
_BY_CODE = {v: k for k, v in FAMILY_CODES.items()}


def _spec_for(code, alpha, delta, eps):
    fam = _BY_CODE[code]
    return SwfSpec(
        fam,
        alpha=alpha if fam is Family.ALPHA else None,
        delta=delta if fam is Family.THRESHOLD else None,
        eps=eps,
    )


def _lex_best(S):
    """Index of the lexicographically largest row (first one on ties)."""
    idx = np.arange(S.shape[0])
    for col in range(S.shape[1]):
        vals = S[idx, col]
        idx = idx[vals == vals.max()]
        if idx.size == 1:
            break
    return int(idx[0])


def grid_argmax(p, kmax, budget_units, step, family, alpha, delta, eps, umax):
    p = np.asarray(p, dtype=float)
    kmax = np.asarray(kmax, dtype=np.int64)
    n = p.size
    leximax = family == FAMILY_CODES[Family.LEXIMAX]
    spec = None if leximax else _spec_for(family, alpha, delta, eps)
    u_max = np.asarray(umax, dtype=float) if len(umax) else None

    if n > 1:
        tail = np.indices(kmax[1:] + 1).reshape(n - 1, -1).T
        tail_sum = tail.sum(axis=1)
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
        tail_sum = np.zeros(1, dtype=np.int64)

    count = 0
    best_k, best_val, best_sorted = None, -np.inf, None
    for k0 in range(int(min(kmax[0], budget_units)) + 1):
        rows = tail[tail_sum <= budget_units - k0]
        if rows.shape[0] == 0:
            continue
        K = np.empty((rows.shape[0], n), dtype=np.int64)
        K[:, 0] = k0
        K[:, 1:] = rows
        count += K.shape[0]
        U = p * (K * step)
        if leximax:
            S = np.sort(U, axis=1)
            j = _lex_best(S)
            if best_sorted is None or _lex_gt(S[j], best_sorted):
                best_sorted, best_k, best_val = S[j], K[j].copy(), float(S[j, 0])
            continue
        vals = welfare_rows(spec, U, u_max)
        if np.all(np.isnan(vals)):
            continue
        j = int(np.nanargmax(vals))
        if best_k is None or vals[j] > best_val:
            best_k, best_val = K[j].copy(), float(vals[j])
    if best_k is None:
        return None, float("nan"), count
    return best_k, best_val, count


def _lex_gt(a, b):
    for x, y in zip(a, b):
        if x != y:
            return x > y
    return False
