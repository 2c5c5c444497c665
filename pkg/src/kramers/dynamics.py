"""Tags selecting one of the three Langevin dynamics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .spectral import check_antisymmetric


@dataclass(frozen=True)
class LD:
    """Overdamped (reversible) Langevin dynamics."""

    name = "LD"


@dataclass(frozen=True)
class ULD:
    """Underdamped Langevin dynamics with friction ``gamma``."""

    gamma: float
    name = "ULD"

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("friction must be positive")


@dataclass(frozen=True)
class NLD:
    """Overdamped dynamics with the drift premultiplied by ``I + J``, ``J`` antisymmetric."""

    J: np.ndarray = field(compare=False)
    name = "NLD"

    def __post_init__(self):
        object.__setattr__(self, "J", check_antisymmetric(self.J))


Dynamics = LD | ULD | NLD
