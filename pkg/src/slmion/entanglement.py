"""Heralded multi-ion entanglement by single-photon detection.

N ions are each prepared in sqrt(1-p)|g-> + sqrt(p)|g+>, the |g+> part is
excited and decays back with one photon. A click at the point where all
images overlap projects onto the W state with one excitation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError

MAX_DENSE_IONS = 20


@dataclass(frozen=True)
class DickeParams:
    N: int
    n: int = 1
    p: float = 0.05
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")
        if not 0 <= self.n <= self.N:
            raise DomainError(f"excitation count n={self.n} outside [0, {self.N}]")
        if not 0 <= self.p <= 1:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        phases = tuple(float(x) for x in self.phases) or (0.0,) * self.N
        if len(phases) != self.N:
            raise DomainError("one phase per ion is required")
        object.__setattr__(self, "phases", phases)


@dataclass(frozen=True)
class ProtocolBudget:
    rho: float = 0.07
    duty_cycle: float = 3e3

    def __post_init__(self):
        if self.rho < 0 or self.duty_cycle < 0:
            raise DomainError("efficiency and duty cycle must be non-negative")


def w_state_amplitudes(params: DickeParams) -> np.ndarray:
    """Dense state vector of the generalised W state over 2**N basis strings.

    Ion 0 is the most significant bit and bit value 1 means |g+>. Each
    string with exactly ``n`` ions in |g+> carries
    ``binom(N, n)**-0.5 * exp(i * sum of those ions' phases)``.
    """
    N, n = params.N, params.n
    if N > MAX_DENSE_IONS:
        raise DomainError(f"dense states are limited to N <= {MAX_DENSE_IONS}")
    psi = np.zeros(2 ** N, dtype=complex)
    norm = 1 / math.sqrt(math.comb(N, n))
    for excited in combinations(range(N), n):
        index = sum(1 << (N - 1 - a) for a in excited)
        psi[index] = norm * np.exp(1j * sum(params.phases[a] for a in excited))
    return psi


def _check_p(N, p):
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")


def single_photon_probability(N: int, p: float) -> float:
    """Probability that exactly one of N ions emits, N p (1-p)^(N-1)."""
    _check_p(N, p)
    return N * p * (1 - p) ** (N - 1)


def herald_fidelity(N: int, p: float, full_output: bool = False):
    """Fidelity of the heralded W state when multi-photon clicks are not rejected.

    F = N p (1-p)^(N-1) / (1 - (1-p)^N). At p = 0 the single-photon limit 1
    is returned; with ``full_output`` the second value tells whether that
    limit was taken. p = 1 never yields a single-photon event.
    """
    _check_p(N, p)
    if p == 1:
        raise DomainError("p = 1 excites every ion; no single-photon herald exists")
    if p == 0:
        return (1.0, True) if full_output else 1.0
    # 1 - (1-p)^N without cancellation for small p
    any_click = -math.expm1(N * math.log1p(-p))
    F = single_photon_probability(N, p) / any_click
    return (F, False) if full_output else F


def herald_fidelity_sum(N: int, p: float) -> float:
    """Same fidelity with the denominator written as the binomial sum."""
    _check_p(N, p)
    den = sum(math.comb(N, k) * p ** k * (1 - p) ** (N - k) for k in range(1, N + 1))
    return single_photon_probability(N, p) / den


def success_probability(N: int, p: float, budget: ProtocolBudget) -> float:
    return budget.rho * single_photon_probability(N, p)


def rate_estimate(N: int, p: float, budget: ProtocolBudget) -> float:
    """Heralded events per second."""
    return budget.duty_cycle * success_probability(N, p, budget)


def loss_budget(collection: float, transmission: float, qe: float, eps1: float):
    """Return (eps2, rho) for the detection path and SLM efficiency."""
    for name, v in (("collection", collection), ("transmission", transmission),
                    ("qe", qe), ("eps1", eps1)):
        if not 0 <= v <= 1:
            raise DomainError(f"{name} must lie in [0, 1], got {v}")
    eps2 = collection * transmission * qe
    return eps2, eps1 * eps2
