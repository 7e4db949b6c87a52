from dataclasses import dataclass

import numpy as np

from utils.exceptions import ConfigurationError


@dataclass(frozen=True)
class ClassPrior:
    """
    Per-class training counts and the quantities derived from them.

    counts n_i, proportions p_i = n_i / sum(n), ratios rho_i = n_i / n_min.
    """
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise ConfigurationError(f"Class counts must be a non-empty vector, got shape {counts.shape}")
        if not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ConfigurationError("Class counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 1):
            raise ConfigurationError(f"Every class needs at least one sample, got counts {counts.tolist()}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_labels(cls, labels: np.ndarray, num_classes: int) -> "ClassPrior":
        return cls(np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes))

    @property
    def class_count(self) -> int:
        return int(self.counts.size)

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def log_proportions(self) -> np.ndarray:
        return np.log(self.proportions)

    @property
    def ratios(self) -> np.ndarray:
        return self.counts / self.counts.min()
