import pytest

from losses.config import BaseLoss, BaselineKind, GradientMode, HeadKind, MarginApplication
from losses.variants import DEFAULT_BASELINE_MARGINS, resolve_variant
from utils.exceptions import ConfigurationError


@pytest.mark.parametrize("name, base, head, k, application", [
    ("ce", BaseLoss.CE, HeadKind.COSINE, 0.0, MarginApplication.NONE),
    ("bs", BaseLoss.BS, HeadKind.COSINE, 0.0, MarginApplication.NONE),
    ("linear-ce", BaseLoss.CE, HeadKind.LINEAR, 0.0, MarginApplication.NONE),
    ("linear-bs", BaseLoss.BS, HeadKind.LINEAR, 0.0, MarginApplication.NONE),
    ("cosine-ce+mc", BaseLoss.CE, HeadKind.COSINE, 0.1, MarginApplication.NONE),
    ("cosine-bs+mc+mi-p", BaseLoss.BS, HeadKind.COSINE, 0.1, MarginApplication.ALL_POSITIVES),
    ("cosine-bs+mc+mi-hp", BaseLoss.BS, HeadKind.COSINE, 0.1, MarginApplication.HARD_POSITIVES),
    ("dbm-ce", BaseLoss.CE, HeadKind.COSINE, 0.1, MarginApplication.HARD_POSITIVES),
    ("dbm-cb", BaseLoss.CB, HeadKind.COSINE, 0.1, MarginApplication.HARD_POSITIVES),
    ("DBM-BS", BaseLoss.BS, HeadKind.COSINE, 0.1, MarginApplication.HARD_POSITIVES),
])
def test_resolve_dbm_family(name, base, head, k, application):
    variant = resolve_variant(name)
    assert variant.spec.base == base
    assert variant.head == head
    assert variant.spec.margin.k == k
    assert variant.spec.margin.application == application
    assert variant.spec.baseline is None
    assert not variant.deferred_reweighting


@pytest.mark.parametrize("kind", list(BaselineKind))
def test_resolve_baselines_use_default_margins(kind):
    variant = resolve_variant(kind.value)
    assert variant.spec.baseline.kind == kind
    assert variant.spec.baseline.m == DEFAULT_BASELINE_MARGINS[kind]
    assert variant.spec.margin.k == 0.0
    assert variant.head == HeadKind.COSINE


def test_resolve_deferred_reweighting():
    ldam = resolve_variant("ldam-drw")
    assert ldam.deferred_reweighting
    assert ldam.spec.baseline.kind == BaselineKind.LDAM

    dbm = resolve_variant("dbm-drw")
    assert dbm.deferred_reweighting
    assert dbm.spec.base == BaseLoss.CE
    assert dbm.spec.margin.k == 0.1


def test_resolve_passes_hyperparameters():
    variant = resolve_variant("dbm-bs", k=0.3, tau=0.5, scale=16.0, gradient_mode=GradientMode.THROUGH)
    margin = variant.spec.margin
    assert (margin.k, margin.tau, margin.scale, margin.gradient_mode) == (0.3, 0.5, 16.0, GradientMode.THROUGH)
    assert resolve_variant("cosface", baseline_m=0.2).spec.baseline.m == 0.2


@pytest.mark.parametrize("name", ["focal", "linear-ce+mc", "linear-arcface", "cb-drw", "ce+mi-hp", "dbm-xx"])
def test_resolve_rejects_unknown_or_invalid(name):
    with pytest.raises(ConfigurationError):
        resolve_variant(name)
