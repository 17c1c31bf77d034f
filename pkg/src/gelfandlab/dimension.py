"""Dimension-dependent critical constants for -Delta u = lambda f(u) in the unit ball."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class DimensionConstants:
    """Joseph-Lundgren critical quantities in dimension N.

    q_jl is the critical value of the growth ratio q = lim f'^2/(f f''); p_jl the
    corresponding power-law exponent (infinite for N <= 10); a the decay rate of the
    transformed singular equation; gamma_crit the stability threshold for k = 2
    perturbations; hardy_const the best constant of Hardy's inequality.
    """

    N: int
    q_jl: float = field(init=False)
    p_jl: float = field(init=False)
    a: float = field(init=False)
    gamma_crit: float = field(init=False)
    hardy_const: float = field(init=False)

    def __post_init__(self):
        if self.N < 3:
            raise ValueError(f"dimension must be >= 3, got {self.N}")
        n = self.N
        root = math.sqrt(n - 1.0)
        object.__setattr__(self, "q_jl", (n - 2.0 * root) / 4.0)
        if n >= 11:
            p_jl = 1.0 + 4.0 / (n - 4.0 - 2.0 * root)
        else:
            p_jl = math.inf
        object.__setattr__(self, "p_jl", p_jl)
        object.__setattr__(self, "a", 1.0 + root)
        object.__setattr__(self, "gamma_crit", 1.0 / (4.0 * root))
        object.__setattr__(self, "hardy_const", (n - 2.0) ** 2 / 4.0)

    @property
    def sobolev_exponent(self):
        return (self.N + 2.0) / (self.N - 2.0)

    @property
    def autonomous_mass(self):
        """Coefficient 2N - 4 q_jl of the transformed equations; equals a^2."""
        return 2.0 * self.N - 4.0 * self.q_jl
