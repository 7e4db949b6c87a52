"""
Named loss variants used by configs and sweeps.

Grammar:
    [linear-|cosine-]<base>[+mc[+mi-p|+mi-hp]]     base in {ce, cb, bs}
    dbm-<base>                                      same as cosine-<base>+mc+mi-hp
    ldam | cosface | arcface | sphereface           fixed margins on CE
    <name>-drw                                      CE first, CB weights from the DRW epoch

Plain base names ("ce", "bs", ...) use the cosine head; the "linear-" prefix
selects the linear classifier.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict

from losses.config import (
    BaseLoss,
    BaselineKind,
    BaselineMarginSpec,
    GradientMode,
    HeadKind,
    LossSpec,
    MarginApplication,
    MarginConfig,
)
from utils.exceptions import ConfigurationError

DEFAULT_BASELINE_MARGINS = {
    BaselineKind.LDAM: 0.5,
    BaselineKind.COSFACE: 0.35,
    BaselineKind.ARCFACE: 0.5,
    BaselineKind.SPHEREFACE: 2.0,
}

_ABLATIONS = {
    "": (False, MarginApplication.NONE),
    "+mc": (True, MarginApplication.NONE),
    "+mc+mi-p": (True, MarginApplication.ALL_POSITIVES),
    "+mc+mi-hp": (True, MarginApplication.HARD_POSITIVES),
}


class LossVariant(BaseModel):
    """A resolved variant: objective, head and whether deferred re-weighting applies."""
    model_config = ConfigDict(frozen=True)

    name: str
    spec: LossSpec
    head: HeadKind
    deferred_reweighting: bool = False


def resolve_variant(
        name: str,
        k: float = 0.1,
        tau: float = 1.0,
        scale: float = 32.0,
        beta: float = 0.9999,
        gradient_mode: GradientMode = GradientMode.DETACHED,
        baseline_m: Optional[float] = None
) -> LossVariant:
    """
    Turn a variant name into a LossSpec and head kind.

    Raises:
        ConfigurationError: for names outside the grammar
    """
    raw = name.strip().lower()
    rest = raw
    drw = rest.endswith("-drw")
    if drw:
        rest = rest[: -len("-drw")]
        if rest == "dbm":
            rest = "dbm-ce"

    head = HeadKind.COSINE
    if rest.startswith("linear-"):
        head = HeadKind.LINEAR
        rest = rest[len("linear-"):]
    elif rest.startswith("cosine-"):
        rest = rest[len("cosine-"):]

    if rest in {kind.value for kind in BaselineKind}:
        kind = BaselineKind(rest)
        if head == HeadKind.LINEAR:
            raise ConfigurationError(f"Variant {name!r}: margin losses need a cosine head")
        m = DEFAULT_BASELINE_MARGINS[kind] if baseline_m is None else baseline_m
        spec = LossSpec(
            base=BaseLoss.CE,
            margin=MarginConfig(k=0.0, scale=scale, application=MarginApplication.NONE),
            baseline=BaselineMarginSpec(kind=kind, m=m),
            beta=beta,
        )
        return LossVariant(name=raw, spec=spec, head=head, deferred_reweighting=drw)

    if rest.startswith("dbm-"):
        rest = rest[len("dbm-"):] + "+mc+mi-hp"

    base_name, plus, ablation = rest.partition("+")
    ablation = plus + ablation
    try:
        base = BaseLoss(base_name)
    except ValueError:
        raise ConfigurationError(f"Unknown loss variant {name!r}")
    if ablation not in _ABLATIONS:
        raise ConfigurationError(f"Unknown margin components {ablation!r} in variant {name!r}")

    uses_margin, application = _ABLATIONS[ablation]
    if uses_margin and head == HeadKind.LINEAR:
        raise ConfigurationError(f"Variant {name!r}: margins need a cosine head")
    if drw and base != BaseLoss.CE:
        raise ConfigurationError(f"Variant {name!r}: deferred re-weighting starts from CE")

    margin = MarginConfig(
        k=k if uses_margin else 0.0,
        tau=tau,
        scale=scale,
        application=application,
        gradient_mode=gradient_mode,
    )
    return LossVariant(
        name=raw,
        spec=LossSpec(base=base, margin=margin, beta=beta),
        head=head,
        deferred_reweighting=drw,
    )
