from typing import List

import numpy as np


class SGDMomentum:
    """
    v <- mu v - lr (g + wd theta);  theta <- theta + v

    Updates the parameter arrays in place.
    """

    def __init__(self, params: List[np.ndarray], momentum: float = 0.9, weight_decay: float = 0.0):
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities = [np.zeros_like(p) for p in params]

    def step(self, grads: List[np.ndarray], lr: float) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"Expected {len(self.params)} gradient arrays, got {len(grads)}")
        for param, grad, velocity in zip(self.params, grads, self.velocities):
            velocity *= self.momentum
            velocity -= lr * (grad + self.weight_decay * param)
            param += velocity
