"""Social welfare functions over utility vectors.

Every scalar SWF is oriented so that larger values are better; inequality
indices are returned in negated form.  The array helpers in this module work
along the last axis, which lets the grid oracle score many candidate utility
vectors at once with the same formulas used for single vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

DEFAULT_EPS = 1e-6
KS_REL_TOL = 1e-9


class SWFError(ValueError):
    """Base class for welfare evaluation errors."""


class ZeroMeanError(SWFError):
    pass


class ZeroMedianError(SWFError):
    pass


class InvalidAlphaError(SWFError):
    pass


class UnsupportedFamilyError(SWFError):
    pass


class LengthMismatchError(SWFError):
    pass


class Family(str, Enum):
    UTILITARIAN = "utilitarian"
    RELATIVE_RANGE = "relative-range"
    RELATIVE_MEAN_DEVIATION = "relative-mean-deviation"
    COEFFICIENT_OF_VARIATION = "coefficient-of-variation"
    GINI = "gini"
    HOOVER = "hoover"
    MCLOONE = "mcloone"
    MAXIMIN = "maximin"
    ALPHA = "alpha"
    PROPORTIONAL = "proportional"
    KALAI_SMORODINSKY = "kalai-smorodinsky"
    THRESHOLD = "threshold"
    LEXIMAX = "leximax"


_ALIASES = {
    "util": Family.UTILITARIAN,
    "rr": Family.RELATIVE_RANGE,
    "rmd": Family.RELATIVE_MEAN_DEVIATION,
    "cv": Family.COEFFICIENT_OF_VARIATION,
    "alpha-fairness": Family.ALPHA,
    "proportional-fairness": Family.PROPORTIONAL,
    "pf": Family.PROPORTIONAL,
    "nash": Family.PROPORTIONAL,
    "ks": Family.KALAI_SMORODINSKY,
    "rawls": Family.MAXIMIN,
}

# Families whose value only depends on the utility shape, not its scale.
SCALE_INVARIANT = frozenset(
    {
        Family.RELATIVE_RANGE,
        Family.RELATIVE_MEAN_DEVIATION,
        Family.COEFFICIENT_OF_VARIATION,
        Family.GINI,
        Family.HOOVER,
        Family.MCLOONE,
    }
)


def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


@dataclass(frozen=True)
class SwfSpec:
    """A welfare family together with its parameters.

    The canonical text form is ``family[:key=value,...]``, for example
    ``alpha:alpha=0.5`` or ``threshold:delta=2``.  ``eps`` is only written
    when it differs from the default clamp.
    """

    family: Family
    alpha: float | None = None
    delta: float | None = None
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.eps > 0:
            raise ValueError(f"eps clamp must be positive, got {self.eps}")
        if self.family is Family.ALPHA:
            if self.alpha is None:
                raise InvalidAlphaError("alpha fairness needs an alpha value")
            _check_alpha(self.alpha)
        elif self.alpha is not None:
            raise ValueError(f"alpha is only meaningful for alpha fairness, not {self.family.value}")
        if self.family is Family.THRESHOLD:
            if self.delta is None:
                object.__setattr__(self, "delta", 0.0)
            if not self.delta >= 0:
                raise ValueError(f"threshold delta must be >= 0, got {self.delta}")
        elif self.delta is not None:
            raise ValueError(f"delta is only meaningful for the threshold SWF, not {self.family.value}")

    @classmethod
    def parse(cls, text: str) -> "SwfSpec":
        name, _, rest = text.strip().partition(":")
        name = name.strip().lower().replace("_", "-")
        family = _ALIASES.get(name)
        if family is None:
            try:
                family = Family(name)
            except ValueError:
                raise ValueError(f"unknown SWF family {name!r}") from None
        kwargs = {}
        if rest.strip():
            for item in rest.split(","):
                key, sep, value = item.partition("=")
                key = key.strip()
                if not sep or key not in ("alpha", "delta", "eps"):
                    raise ValueError(f"bad SWF parameter {item!r} in {text!r}")
                kwargs[key] = float(value)
        if family is Family.ALPHA and kwargs.get("alpha") == 1.0:
            family = Family.PROPORTIONAL
            del kwargs["alpha"]
        return cls(family, **kwargs)

    def __str__(self) -> str:
        params = []
        if self.alpha is not None:
            params.append(f"alpha={_fmt(self.alpha)}")
        if self.delta is not None:
            params.append(f"delta={_fmt(self.delta)}")
        if self.eps != DEFAULT_EPS:
            params.append(f"eps={_fmt(self.eps)}")
        return self.family.value + (":" + ",".join(params) if params else "")


def _check_alpha(alpha: float) -> None:
    if not alpha >= 0:
        raise InvalidAlphaError(f"alpha must be >= 0, got {alpha}")
    if alpha == 1:
        raise InvalidAlphaError("alpha = 1 is proportional fairness; use that family")


def as_utilities(u: ArrayLike) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"utility vector must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("utility vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError("utility vector contains non-finite values")
    return arr


# --- array kernels (last axis); undefined entries come back as nan --------

def _safe_div(num, den):
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.divide(num, den)
    return np.where(den == 0, np.nan, out)


def utilitarian_rows(U):
    return np.sum(U, axis=-1)


def relative_range_rows(U):
    return -_safe_div(np.max(U, axis=-1) - np.min(U, axis=-1), np.mean(U, axis=-1))


def _abs_dev(U):
    return np.sum(np.abs(U - np.mean(U, axis=-1, keepdims=True)), axis=-1)


def relative_mean_deviation_rows(U):
    return -_safe_div(_abs_dev(U), np.mean(U, axis=-1))


def coefficient_of_variation_rows(U):
    return -_safe_div(np.std(U, axis=-1), np.mean(U, axis=-1))


def gini_rows(U):
    n = U.shape[-1]
    pair_sum = np.sum(np.abs(U[..., :, None] - U[..., None, :]), axis=(-2, -1))
    return 1.0 - _safe_div(pair_sum, 2.0 * np.mean(U, axis=-1) * n * n)


def hoover_rows(U):
    # proportional to the relative mean deviation by construction
    return relative_mean_deviation_rows(U) / (2.0 * U.shape[-1])


def mcloone_rows(U):
    med = np.median(U, axis=-1, keepdims=True)
    below = U <= med
    total = np.sum(np.where(below, U, 0.0), axis=-1)
    return _safe_div(total, np.sum(below, axis=-1) * med[..., 0])


def maximin_rows(U):
    return np.min(U, axis=-1)


def _clamp_rows(U, eps, force):
    if force:
        return np.maximum(U, eps)
    needs = np.any(U <= 0, axis=-1, keepdims=True)
    return np.where(needs, np.maximum(U, eps), U)


def alpha_rows(U, alpha, eps=DEFAULT_EPS):
    _check_alpha(alpha)
    V = _clamp_rows(U, eps, force=alpha > 1)
    return np.sum(V ** (1.0 - alpha), axis=-1) / (1.0 - alpha)


def proportional_rows(U, eps=DEFAULT_EPS):
    return np.sum(np.log(np.maximum(U, eps)), axis=-1)


def threshold_rows(U, delta):
    n = U.shape[-1]
    umin = np.min(U, axis=-1, keepdims=True)
    return (n - 1) * delta + np.sum(np.maximum(U - delta, umin), axis=-1)


def ks_rows(U, u_max):
    u_max = np.asarray(u_max, dtype=float)
    beta = U / u_max
    lo = np.min(beta, axis=-1)
    hi = np.max(beta, axis=-1)
    centre = 0.5 * (lo + hi)
    on_ray = (hi - lo) <= KS_REL_TOL * np.abs(centre)
    on_ray &= (centre >= -KS_REL_TOL) & (centre <= 1.0 + KS_REL_TOL)
    return np.where(on_ray, np.sum(U, axis=-1), 0.0)


def welfare_rows(spec: SwfSpec, U, u_max=None):
    """Evaluate ``spec`` on every row of ``U`` (shape ``(..., n)``)."""
    U = np.asarray(U, dtype=float)
    fam = spec.family
    if fam is Family.UTILITARIAN:
        return utilitarian_rows(U)
    if fam is Family.RELATIVE_RANGE:
        return relative_range_rows(U)
    if fam is Family.RELATIVE_MEAN_DEVIATION:
        return relative_mean_deviation_rows(U)
    if fam is Family.COEFFICIENT_OF_VARIATION:
        return coefficient_of_variation_rows(U)
    if fam is Family.GINI:
        return gini_rows(U)
    if fam is Family.HOOVER:
        return hoover_rows(U)
    if fam is Family.MCLOONE:
        return mcloone_rows(U)
    if fam is Family.MAXIMIN:
        return maximin_rows(U)
    if fam is Family.ALPHA:
        return alpha_rows(U, spec.alpha, spec.eps)
    if fam is Family.PROPORTIONAL:
        return proportional_rows(U, spec.eps)
    if fam is Family.THRESHOLD:
        return threshold_rows(U, spec.delta)
    if fam is Family.KALAI_SMORODINSKY:
        if u_max is None:
            raise ValueError("Kalai-Smorodinsky evaluation needs the u_max vector")
        return ks_rows(U, u_max)
    raise UnsupportedFamilyError(
        f"{fam.value} is not scalar-valued; compare vectors with leximax_compare"
    )


# --- public scalar evaluators ---------------------------------------------

def _nonzero_mean(u: np.ndarray) -> None:
    if np.mean(u) == 0:
        raise ZeroMeanError("SWF undefined for a utility vector with zero mean")


def utilitarian(u: ArrayLike) -> float:
    return float(utilitarian_rows(as_utilities(u)))


def relative_range(u: ArrayLike) -> float:
    u = as_utilities(u)
    _nonzero_mean(u)
    return float(relative_range_rows(u))


def relative_mean_deviation(u: ArrayLike) -> float:
    u = as_utilities(u)
    _nonzero_mean(u)
    return float(relative_mean_deviation_rows(u))


def coefficient_of_variation(u: ArrayLike) -> float:
    u = as_utilities(u)
    _nonzero_mean(u)
    return float(coefficient_of_variation_rows(u))


def gini(u: ArrayLike) -> float:
    """Gini welfare ``1 - sum_{i,j} |u_i - u_j| / (2 mean n^2)``.

    The double sum runs over all ordered pairs, so perfect equality scores 1.
    Note this is one minus the usual Gini coefficient.
    """
    u = as_utilities(u)
    _nonzero_mean(u)
    return float(gini_rows(u))


def hoover(u: ArrayLike) -> float:
    u = as_utilities(u)
    _nonzero_mean(u)
    return float(hoover_rows(u))


def mcloone(u: ArrayLike) -> float:
    """McLoone index: total utility at or below the median relative to the
    median level.  Even-length medians average the two central values."""
    u = as_utilities(u)
    if np.median(u) == 0:
        raise ZeroMedianError("McLoone index undefined when the median utility is 0")
    return float(mcloone_rows(u))


def maximin(u: ArrayLike) -> float:
    return float(maximin_rows(as_utilities(u)))


def alpha_fairness(u: ArrayLike, alpha: float, eps: float = DEFAULT_EPS) -> float:
    """Alpha-fair welfare ``sum u_i^(1-alpha) / (1-alpha)``.

    Utilities are clamped to ``max(u_i, eps)`` when ``alpha > 1`` or when
    any entry is non-positive.
    """
    return float(alpha_rows(as_utilities(u), alpha, eps))


def proportional_fairness(u: ArrayLike, eps: float = DEFAULT_EPS) -> float:
    return float(proportional_rows(as_utilities(u), eps))


def threshold(u: ArrayLike, delta: float) -> float:
    """Threshold welfare ``(n-1) delta + sum_i max(u_i - delta, u_min)``.

    Everyone within ``delta`` of the worst-off is counted at the worst-off
    level; ``delta = 0`` is utilitarian.
    """
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return float(threshold_rows(as_utilities(u), delta))


def kalai_smorodinsky(u: ArrayLike, u_max: ArrayLike) -> float:
    """Sum of utilities if ``u`` lies on the segment ``[0, u_max]``, else 0.

    Membership uses a relative tolerance of 1e-9 on the common ratio.
    """
    u = as_utilities(u)
    u_max = as_utilities(u_max)
    if u.shape != u_max.shape:
        raise LengthMismatchError(f"u has {u.size} entries but u_max has {u_max.size}")
    if np.any(u_max <= 0):
        raise ValueError("u_max entries must be positive")
    return float(ks_rows(u, u_max))


def leximax_compare(u1: ArrayLike, u2: ArrayLike, tol: float = 0.0) -> int:
    """Compare two utility vectors in the leximax order.

    Both vectors are sorted ascending and compared lexicographically.
    Returns 1 if ``u1`` is preferred, -1 if ``u2`` is, 0 if they tie.
    Entries closer than ``tol`` are treated as equal.
    """
    a = np.sort(as_utilities(u1))
    b = np.sort(as_utilities(u2))
    if a.shape != b.shape:
        raise LengthMismatchError(f"cannot compare vectors of length {a.size} and {b.size}")
    for x, y in zip(a, b):
        if abs(x - y) <= tol:
            continue
        return 1 if x > y else -1
    return 0


_SCALAR = {
    Family.UTILITARIAN: utilitarian,
    Family.RELATIVE_RANGE: relative_range,
    Family.RELATIVE_MEAN_DEVIATION: relative_mean_deviation,
    Family.COEFFICIENT_OF_VARIATION: coefficient_of_variation,
    Family.GINI: gini,
    Family.HOOVER: hoover,
    Family.MCLOONE: mcloone,
    Family.MAXIMIN: maximin,
}


def evaluate(spec: SwfSpec | str, u: ArrayLike, u_max: ArrayLike | None = None) -> float:
    """Evaluate a scalar SWF.  Leximax is rejected; use :func:`leximax_compare`."""
    if isinstance(spec, str):
        spec = SwfSpec.parse(spec)
    fam = spec.family
    if fam in _SCALAR:
        return _SCALAR[fam](u)
    if fam is Family.ALPHA:
        return alpha_fairness(u, spec.alpha, spec.eps)
    if fam is Family.PROPORTIONAL:
        return proportional_fairness(u, spec.eps)
    if fam is Family.THRESHOLD:
        return threshold(u, spec.delta)
    if fam is Family.KALAI_SMORODINSKY:
        if u_max is None:
            raise ValueError("Kalai-Smorodinsky evaluation needs the u_max vector")
        return kalai_smorodinsky(u, u_max)
    raise UnsupportedFamilyError(
        f"{fam.value} is not scalar-valued; compare vectors with leximax_compare"
    )


def parse_specs(texts: str | Sequence[str]) -> list[SwfSpec]:
    """Parse a ``;``-separated string (or a list) of SWF specs."""
    if isinstance(texts, str):
        texts = [t for t in texts.split(";") if t.strip()]
    return [SwfSpec.parse(t) for t in texts]
