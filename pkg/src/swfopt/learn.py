"""L1-regularized logistic regression with an optional welfare term.

Training minimizes

    C * sum_i log(1 + exp(-y_i <theta, x_i>)) + lambda1 * ||theta[1:]||_1
        - lambda2 * W(u~)

where ``u~_i = g_{y_i} * tanh(kappa <theta, x_i>) + b_{y_i}`` is a smooth
stand-in for the outcome utility of the hard prediction.  With
``lambda2 = 0`` this is plain L1 logistic regression.  Reported metrics
always use hard labels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .swf import DEFAULT_EPS, Family, SwfSpec

CASE_STUDY_SWFS = frozenset({Family.UTILITARIAN, Family.ALPHA, Family.PROPORTIONAL, Family.MAXIMIN})
SMOOTHABLE = CASE_STUDY_SWFS | {Family.THRESHOLD}
SOFTMIN_FRACTION = 0.01


class TrainingError(ValueError):
    pass


class SingleClassDataError(TrainingError):
    pass


class NonFiniteLossError(TrainingError):
    pass


class DimensionMismatchError(ValueError):
    pass


class ExperimentalSWFWarning(UserWarning):
    pass


@dataclass(frozen=True)
class UtilityParams:
    """Outcome utility ``u = g_y * y_hat + b_y`` for labels in {+1, -1}."""

    g_pos: float = 0.25
    g_neg: float = -0.25
    b_pos: float = 0.5
    b_neg: float = 0.25

    def __post_init__(self):
        tp, fn = self.g_pos + self.b_pos, -self.g_pos + self.b_pos
        tn, fp = -self.g_neg + self.b_neg, self.g_neg + self.b_neg
        if not (tp > fn and tn > fp):
            raise ValueError("correct predictions must carry more utility than incorrect ones")

    def coefficients(self, y: np.ndarray):
        pos = y > 0
        return np.where(pos, self.g_pos, self.g_neg), np.where(pos, self.b_pos, self.b_neg)

    @property
    def scale(self) -> float:
        """Largest attainable outcome utility."""
        return max(abs(self.g_pos) + self.b_pos, abs(self.g_neg) + self.b_neg)


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    lambda1: float = 1e-4
    lambda2: float = 0.0
    swf: SwfSpec = field(default_factory=lambda: SwfSpec(Family.UTILITARIAN))
    kappa: float = 5.0
    max_iter: int = 2000
    step_scale: float = 1.0
    step_growth: float = 1.25
    tol: float = 1e-10
    seed: int = 0  # theta starts at zero; kept so runs are fully described

    def __post_init__(self):
        if isinstance(self.swf, str):
            object.__setattr__(self, "swf", SwfSpec.parse(self.swf))
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization weights must be nonnegative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def to_text(self) -> str:
        d = asdict(self)
        d["swf"] = str(self.swf)
        return " ".join(f"{k}={v!r}" if not isinstance(v, str) else f"{k}={v}" for k, v in d.items())

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        kw = {}
        for item in text.split():
            k, _, v = item.partition("=")
            if k == "swf":
                kw[k] = SwfSpec.parse(v)
            elif k in ("max_iter", "seed"):
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)


@dataclass
class LinearModel:
    theta: np.ndarray
    tau: float = 0.5
    feature_names: list[str] | None = None
    config: TrainConfig | None = None
    history: list[float] = field(default_factory=list, repr=False, compare=False)
    iterations: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.theta.size:
            raise DimensionMismatchError(
                f"features have dimension {X.shape[-1]}, model expects {self.theta.size}"
            )
        return X @ self.theta


def sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def predict_proba(model: LinearModel, X) -> np.ndarray | float:
    """Repay probability ``1 / (1 + exp(-<theta, x>))``; ``x`` includes the intercept 1."""
    p = sigmoid(model.scores(X))
    return float(p) if np.ndim(p) == 0 else p


def classify(model: LinearModel, X) -> np.ndarray | int:
    """+1 when the probability is strictly above ``tau``, else -1."""
    p = np.asarray(predict_proba(model, X))
    out = np.where(p > model.tau, 1, -1)
    return int(out) if out.ndim == 0 else out


def outcome_utility(y, y_hat, params: UtilityParams = UtilityParams()):
    y = np.asarray(y)
    g, b = params.coefficients(y)
    out = g * np.asarray(y_hat, dtype=float) + b
    return float(out) if out.ndim == 0 else out


# --- objective pieces -------------------------------------------------------

def logistic_loss(theta, X, y, C=1.0) -> float:
    return float(C * np.sum(np.logaddexp(0.0, -y * (X @ theta))))


def logistic_loss_grad(theta, X, y, C=1.0) -> np.ndarray:
    m = -y * (X @ theta)
    return C * (X.T @ (-y * sigmoid(m)))


def softmin(u: np.ndarray, temperature: float):
    """Smooth minimum ``-T log sum exp(-u/T)`` and its weights."""
    m = u.min()
    w = np.exp(-(u - m) / temperature)
    s = w.sum()
    return m - temperature * math.log(s), w / s


def _surrogate_utilities(theta, X, y, params: UtilityParams, kappa):
    g, b = params.coefficients(y)
    t = np.tanh(kappa * (X @ theta))
    return g * t + b, g, t


def smoothed_welfare(theta, X, y, spec: SwfSpec, params: UtilityParams = UtilityParams(),
                     kappa: float = 5.0) -> float:
    return _welfare_value_grad(theta, X, y, spec, params, kappa, want_grad=False)[0]


def smoothed_welfare_grad(theta, X, y, spec: SwfSpec, params: UtilityParams = UtilityParams(),
                          kappa: float = 5.0) -> np.ndarray:
    return _welfare_value_grad(theta, X, y, spec, params, kappa, want_grad=True)[1]


def _welfare_value_grad(theta, X, y, spec, params, kappa, want_grad=True):
    u, g, t = _surrogate_utilities(theta, X, y, params, kappa)
    fam, eps = spec.family, spec.eps
    if fam is Family.UTILITARIAN:
        val, dW = u.sum(), np.ones_like(u)
    elif fam is Family.ALPHA:
        v = np.maximum(u, eps)
        val = np.sum(v ** (1.0 - spec.alpha)) / (1.0 - spec.alpha)
        dW = np.where(u > eps, v ** (-spec.alpha), 0.0)
    elif fam is Family.PROPORTIONAL:
        v = np.maximum(u, eps)
        val = np.sum(np.log(v))
        dW = np.where(u > eps, 1.0 / v, 0.0)
    elif fam is Family.MAXIMIN:
        val, dW = softmin(u, SOFTMIN_FRACTION * params.scale)
    elif fam is Family.THRESHOLD:
        m = int(np.argmin(u))
        above = u - spec.delta > u[m]
        val = (u.size - 1) * spec.delta + np.sum(np.where(above, u - spec.delta, u[m]))
        dW = above.astype(float)
        dW[m] += np.count_nonzero(~above)
    else:
        raise TrainingError(f"no smoothed welfare term for {fam.value}")
    if not want_grad:
        return float(val), None
    du = dW * g * kappa * (1.0 - t * t)
    return float(val), X.T @ du


def hard_welfare(spec: SwfSpec, y, y_hat, params: UtilityParams = UtilityParams()) -> float:
    """Welfare of the hard-label outcome utilities (true min for maximin)."""
    from .swf import evaluate

    return evaluate(spec, outcome_utility(y, y_hat, params))


# --- training -------------------------------------------------------------

def _soft_threshold(v, thresh):
    out = np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
    out[0] = v[0]  # intercept is not penalized
    return out


def _check_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatchError(f"X shape {X.shape} does not match labels {y.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteLossError("features contain non-finite values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("labels must be +1 or -1")
    if np.all(y == 1) or np.all(y == -1):
        raise SingleClassDataError("training data contains a single class")
    return X, y


def objective(theta, X, y, cfg: TrainConfig, params: UtilityParams = UtilityParams()) -> float:
    val = logistic_loss(theta, X, y, cfg.C) + cfg.lambda1 * np.abs(theta[1:]).sum()
    if cfg.lambda2 > 0:
        val -= cfg.lambda2 * smoothed_welfare(theta, X, y, cfg.swf, params, cfg.kappa)
    return val


def _smooth_grad(theta, X, y, cfg, params):
    grad = logistic_loss_grad(theta, X, y, cfg.C)
    if cfg.lambda2 > 0:
        grad = grad - cfg.lambda2 * smoothed_welfare_grad(theta, X, y, cfg.swf, params, cfg.kappa)
    return grad


def _fit(X, y, cfg: TrainConfig, params: UtilityParams, feature_names=None) -> LinearModel:
    X, y = _check_data(X, y)
    theta = np.zeros(X.shape[1])
    lipschitz = cfg.C * np.linalg.norm(X, 2) ** 2 / 4.0
    step = cfg.step_scale / lipschitz
    F = objective(theta, X, y, cfg, params)
    history = [F]
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad = _smooth_grad(theta, X, y, cfg, params)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteLossError(f"non-finite gradient at iteration {it}")
        while True:
            cand = _soft_threshold(theta - step * grad, step * cfg.lambda1)
            Fc = objective(cand, X, y, cfg, params)
            if math.isfinite(Fc) and Fc <= F:
                break
            step *= 0.5
            if step < 1e-30:
                raise NonFiniteLossError(f"step size collapsed at iteration {it}")
        decrease = F - Fc
        theta, F = cand, Fc
        step *= cfg.step_growth
        history.append(F)
        if decrease <= cfg.tol * max(1.0, abs(F)):
            break
    return LinearModel(theta, 0.5, feature_names, cfg, history, it)


def train_standard(X, y, cfg: TrainConfig = TrainConfig(), feature_names=None) -> LinearModel:
    """Plain L1 logistic regression by proximal gradient descent from theta = 0."""
    if cfg.lambda2 != 0:
        cfg = replace(cfg, lambda2=0.0)
    return _fit(X, y, cfg, UtilityParams(), feature_names)


def train_in_processing(X, y, cfg: TrainConfig, params: UtilityParams = UtilityParams(),
                        feature_names=None) -> LinearModel:
    """Welfare-regularized logistic regression on the training examples.

    Shares its code path with :func:`train_standard`, so ``lambda2 = 0``
    reproduces the standard model exactly.
    """
    if cfg.lambda2 > 0:
        if cfg.swf.family not in SMOOTHABLE:
            raise TrainingError(f"{cfg.swf.family.value} has no smoothed training term")
        if cfg.swf.family not in CASE_STUDY_SWFS or (
            cfg.swf.family is Family.ALPHA and cfg.swf.alpha != 0.5
        ):
            warnings.warn(f"{cfg.swf} is experimental for in-processing training",
                          ExperimentalSWFWarning, stacklevel=2)
    return _fit(X, y, cfg, params, feature_names)


@dataclass
class ModelEvaluation:
    accuracy: float
    predictions: np.ndarray
    utilities: np.ndarray


def evaluate_model(model: LinearModel, X, y, params: UtilityParams = UtilityParams()) -> ModelEvaluation:
    y = np.asarray(y)
    pred = np.asarray(classify(model, X))
    return ModelEvaluation(float(np.mean(pred == y)), pred, outcome_utility(y, pred, params))


# --- serialization ----------------------------------------------------------

MODEL_HEADER = "swfopt-linear-model v1"


def model_to_text(model: LinearModel) -> str:
    names = model.feature_names or [f"x{i}" for i in range(model.theta.size)]
    lines = [MODEL_HEADER, f"tau {model.tau!r}", "labels +1/-1"]
    if model.config is not None:
        lines.append(f"config {model.config.to_text()}")
    lines.append(f"theta {model.theta.size}")
    lines.extend(f"{float(v)!r}\t{name}" for v, name in zip(model.theta, names))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> LinearModel:
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise ValueError("not a v1 linear model file")
    tau, config, k = 0.5, None, 1
    while k < len(lines) and not lines[k].startswith("theta "):
        key, _, rest = lines[k].partition(" ")
        if key == "tau":
            tau = float(rest)
        elif key == "config":
            config = TrainConfig.from_text(rest)
        elif key == "labels" and rest != "+1/-1":
            raise ValueError(f"unsupported label convention {rest!r}")
        k += 1
    n = int(lines[k].split()[1])
    rows = [line.split("\t", 1) for line in lines[k + 1: k + 1 + n]]
    theta = np.array([float(v) for v, _ in rows])
    return LinearModel(theta, tau, [name for _, name in rows], config)


def save_model(model: LinearModel, path: str | Path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path: str | Path) -> LinearModel:
    return model_from_text(Path(path).read_text())
