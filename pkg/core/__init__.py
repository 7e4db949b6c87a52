from .numerics import (
    CosineHead,
    LinearHead,
    l2_normalize,
    cosine_similarity,
    cosine_logits,
    safe_acos,
    safe_acos_grad,
    softmax,
    log_sum_exp,
    softmax_cross_entropy,
    softmax_cross_entropy_grad,
)

__all__ = [
    "CosineHead",
    "LinearHead",
    "l2_normalize",
    "cosine_similarity",
    "cosine_logits",
    "safe_acos",
    "safe_acos_grad",
    "softmax",
    "log_sum_exp",
    "softmax_cross_entropy",
    "softmax_cross_entropy_grad",
]
