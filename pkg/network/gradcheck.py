"""
Central finite-difference checks of the analytic gradients.

Loss level: d loss / d cos for every loss kind over random cosine batches.
Model level: d loss / d parameters of small random networks, every kind
round-robin. Detached kinds are checked against the frozen-margin surrogate;
entries whose hard-positive flag flips under the perturbation are skipped.
"""

from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from losses.config import BaselineKind, GradientMode, HeadKind
from losses.objectives import BatchLoss, batch_loss
from losses.prior import ClassPrior
from losses.variants import LossVariant, resolve_variant
from network.config import ModelDims
from network.model import forward, backward, init_model
from utils.exceptions import GradientCheckFailed
from utils.logger import get_logger

logger = get_logger(__name__)

LOSS_KINDS = [
    "ce", "cb", "bs",
    "cosface", "arcface", "ldam", "sphereface",
    "dbm-ce:detached", "dbm-ce:through",
    "dbm-cb:detached", "dbm-cb:through",
    "dbm-bs:detached", "dbm-bs:through",
]
MODEL_KINDS = ["linear-ce", "linear-bs"] + LOSS_KINDS

ROWS_PER_BATCH = 25
COS_RANGE = 0.95
MIN_FEATURE_NORM = 0.1
DEFAULT_ERROR_FLOOR = 1.0

GradHook = Callable[[np.ndarray], np.ndarray]


class GradCheckSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    loss_cases: int = Field(1000, ge=1, description="Random samples per loss kind")
    model_cases: int = Field(1000, ge=0, description="Random networks in total, round-robin over kinds")
    seed: int = Field(0, ge=0, description="Seed of the random configurations")
    loss_step: float = Field(1e-6, gt=0.0, description="Finite-difference step on cosines")
    model_step: float = Field(1e-5, gt=0.0, description="Finite-difference step on parameters")
    loss_tolerance: float = Field(1e-6, gt=0.0, description="Worst relative error allowed, loss level")
    model_tolerance: float = Field(1e-5, gt=0.0, description="Worst relative error allowed, model level")
    error_floor: float = Field(
        DEFAULT_ERROR_FLOOR, gt=0.0, description="Lower bound of the relative-error denominator; smaller magnitudes are compared absolutely"
    )


class KindResult(BaseModel):
    kind: str
    level: str
    cases: int
    checked: int = Field(..., description="Gradient entries compared")
    skipped: int = Field(..., description="Entries skipped because a hard-positive flag flipped")
    worst_error: float
    tolerance: float
    error_floor: float = Field(DEFAULT_ERROR_FLOOR, description="Denominator floor of the relative error")

    @property
    def passed(self) -> bool:
        return self.worst_error < self.tolerance


class GradCheckReport(BaseModel):
    seed: int
    results: List[KindResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def worst_by_kind(self) -> Dict[str, float]:
        return {f"{r.level}:{r.kind}": r.worst_error for r in self.results}

    def raise_for_failure(self) -> None:
        failed = [r for r in self.results if not r.passed]
        if failed:
            details = ", ".join(f"{r.level}:{r.kind}={r.worst_error:.3e}" for r in failed)
            raise GradientCheckFailed(f"Analytic gradients disagree with finite differences: {details}")


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = DEFAULT_ERROR_FLOOR) -> np.ndarray:
    """
    |a - n| / max(|a|, |n|, floor), element-wise.

    Entries with magnitude below `floor` are compared on the absolute scale
    of `floor`; with the default floor of 1 that is the absolute error.
    """
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def _random_variant(kind: str, rng: np.random.Generator) -> LossVariant:
    name, _, mode = kind.partition(":")
    baseline_m = None
    if name == BaselineKind.SPHEREFACE.value:
        baseline_m = float(rng.integers(1, 5))
    elif name in {baseline.value for baseline in BaselineKind}:
        baseline_m = float(rng.uniform(0.1, 0.5))
    return resolve_variant(
        name,
        k=float(rng.uniform(0.05, 0.3)),
        tau=float(rng.uniform(0.5, 2.0)),
        scale=float(rng.uniform(1.0, 32.0)),
        beta=float(rng.uniform(0.9, 0.9999)),
        gradient_mode=GradientMode(mode) if mode else GradientMode.DETACHED,
        baseline_m=baseline_m,
    )


def _random_prior(num_classes: int, rng: np.random.Generator) -> ClassPrior:
    return ClassPrior(rng.integers(1, 501, size=num_classes))


def _needs_frozen(variant: LossVariant) -> bool:
    spec = variant.spec
    return spec.baseline is None and spec.margin.k > 0 and spec.margin.gradient_mode == GradientMode.DETACHED


def check_loss_kind(
        kind: str,
        cases: int,
        rng: np.random.Generator,
        step: float = 1e-6,
        tolerance: float = 1e-6,
        grad_hook: Optional[GradHook] = None,
        floor: float = DEFAULT_ERROR_FLOOR
) -> KindResult:
    """Row-wise finite differences of per-sample losses with respect to the cosines."""
    worst, checked, skipped, done = 0.0, 0, 0, 0
    while done < cases:
        rows = min(ROWS_PER_BATCH, cases - done)
        num_classes = int(rng.integers(2, 7))
        variant = _random_variant(kind, rng)
        prior = _random_prior(num_classes, rng)
        cos = rng.uniform(-COS_RANGE, COS_RANGE, size=(rows, num_classes))
        labels = rng.integers(0, num_classes, size=rows)

        base = batch_loss(cos, labels, prior, variant.spec)
        frozen = base.frozen() if _needs_frozen(variant) else None
        analytic = base.grads if grad_hook is None else grad_hook(base.grads)

        numeric = np.zeros_like(cos)
        valid = np.ones_like(cos, dtype=bool)
        for j in range(num_classes):
            shifted = []
            for sign in (1.0, -1.0):
                perturbed = cos.copy()
                perturbed[:, j] += sign * step
                shifted.append(batch_loss(perturbed, labels, prior, variant.spec, frozen=frozen))
            numeric[:, j] = (shifted[0].losses - shifted[1].losses) / (2.0 * step)
            valid[:, j] = (shifted[0].hard == base.hard) & (shifted[1].hard == base.hard)

        errors = relative_error(analytic, numeric, floor)[valid]
        if errors.size:
            worst = max(worst, float(errors.max()))
        checked += int(valid.sum())
        skipped += int((~valid).sum())
        done += rows

    result = KindResult(
        kind=kind, level="loss", cases=cases, checked=checked, skipped=skipped,
        worst_error=worst, tolerance=tolerance, error_floor=floor,
    )
    logger.info(f"gradcheck loss:{kind} cases={cases} worst={worst:.3e} skipped={skipped}")
    return result


def _model_objective(model, x, labels, prior, variant, frozen=None) -> BatchLoss:
    return batch_loss(forward(model, x).outputs, labels, prior, variant.spec, head=variant.head, frozen=frozen)


def check_model_case(
        kind: str,
        rng: np.random.Generator,
        step: float = 1e-5,
        grad_hook: Optional[GradHook] = None,
        floor: float = DEFAULT_ERROR_FLOOR
):
    """One random network; returns (worst relative error, entries checked, entries skipped)."""
    variant = _random_variant(kind, rng)
    num_classes = int(rng.integers(3, 5))
    dims = ModelDims(input_dim=4, hidden_dims=[5, 3], num_classes=num_classes, head=variant.head)
    model = init_model(dims, seed=int(rng.integers(2 ** 31)), scale=variant.spec.margin.scale)
    for param in model.arrays():
        param += rng.normal(0.0, 0.1, size=param.shape)
    prior = _random_prior(num_classes, rng)
    labels = rng.integers(0, num_classes, size=4)

    for _ in range(10):
        x = rng.normal(size=(4, dims.input_dim))
        if variant.head == HeadKind.LINEAR or forward(model, x).cache.feature_norms.min() > MIN_FEATURE_NORM:
            break

    result = forward(model, x)
    base = batch_loss(result.outputs, labels, prior, variant.spec, head=variant.head)
    frozen = base.frozen() if _needs_frozen(variant) else None
    analytic = backward(model, result.cache, base.output_grad).arrays()

    worst, checked, skipped = 0.0, 0, 0
    for param, grad in zip(model.arrays(), analytic):
        grad = grad if grad_hook is None else grad_hook(grad)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + step
            plus = _model_objective(model, x, labels, prior, variant, frozen)
            param[index] = original - step
            minus = _model_objective(model, x, labels, prior, variant, frozen)
            param[index] = original
            if not (np.array_equal(plus.hard, base.hard) and np.array_equal(minus.hard, base.hard)):
                skipped += 1
                continue
            numeric = (plus.loss - minus.loss) / (2.0 * step)
            worst = max(worst, float(relative_error(np.array(grad[index]), np.array(numeric), floor)))
            checked += 1
    return worst, checked, skipped


def run_gradcheck(settings: Optional[GradCheckSettings] = None, grad_hook: Optional[GradHook] = None) -> GradCheckReport:
    """
    Both suites; the report carries the worst relative error per kind.

    `grad_hook` transforms every analytic gradient before comparison.
    """
    settings = settings or GradCheckSettings()
    rng = np.random.default_rng(settings.seed)
    report = GradCheckReport(seed=settings.seed)

    for kind in LOSS_KINDS:
        report.results.append(check_loss_kind(
            kind, settings.loss_cases, rng, settings.loss_step, settings.loss_tolerance, grad_hook,
            settings.error_floor,
        ))

    if settings.model_cases:
        stats = {kind: [0, 0.0, 0, 0] for kind in MODEL_KINDS}
        for case in range(settings.model_cases):
            kind = MODEL_KINDS[case % len(MODEL_KINDS)]
            worst, checked, skipped = check_model_case(kind, rng, settings.model_step, grad_hook, settings.error_floor)
            entry = stats[kind]
            entry[0] += 1
            entry[1] = max(entry[1], worst)
            entry[2] += checked
            entry[3] += skipped
        for kind, (cases, worst, checked, skipped) in stats.items():
            if not cases:
                continue
            report.results.append(KindResult(
                kind=kind, level="model", cases=cases, checked=checked, skipped=skipped,
                worst_error=worst, tolerance=settings.model_tolerance, error_floor=settings.error_floor,
            ))
            logger.info(f"gradcheck model:{kind} cases={cases} worst={worst:.3e} skipped={skipped}")

    status = "passed" if report.passed else "FAILED"
    logger.info(f"Gradient check {status} ({len(report.results)} kinds, seed {settings.seed})")
    return report
