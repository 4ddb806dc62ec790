"""Early-stage infection rates of the scanning strategies, in closed form.

The infection rate alpha is the expected number of new infections per unit
time caused by one infected host at the very start of an outbreak, when the
chance of double infection is negligible.  With scanning rate s, N vulnerable
hosts, and address-space size omega:

    alpha_RS = s * N / omega

For a group-law strategy at level l the per-scan collision probability

    p_h = sum_j p_g(j) * q_g(j)

(the chance that a scan's group choice lands where a random vulnerable host
lives) gives alpha = (s * N / 2**(32-l)) * p_h, i.e. alpha_RS * 2**l * p_h.
Its negative log is the scanner's uncertainty about a vulnerable host's group
and l + log2(p_h) is the information the strategy exploits, so

    alpha = alpha_RS * 2**(info bits).

Closed forms per strategy (beta(l) the non-uniformity factor at level l):

    is (q=p)   alpha_RS * beta(l)
    optis      alpha_RS * 2**l * max_j p_g(j)
    ls         alpha_RS * (1 - p_a + p_a * beta(l))
    2lls       alpha_RS * (1 - p_b - p_c + p_b * beta(8) + p_c * beta(16))
    mss        stage 1 alpha_RS; stage 2 alpha_RS * beta(l)

The time unit is carried symbolically: alpha inherits the unit of s.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .addrspace import ADDRESS_SPACE, GroupDistribution, HostSet, aggregate
from .errors import ParameterError
from .infometrics import NonUniformity, non_uniformity_factor
from .strategies import MAX_VECTOR_LEVEL, ScanStrategy

# Code Red v2 reference point: 360k infected hosts scanning at 358/min.
CODE_RED_POPULATION = 360_000
CODE_RED_SCANS_PER_MINUTE = 358.0

IPV6_SPACE = 2.0 ** 64


def code_red_alpha_per_second() -> float:
    """alpha_RS of Code Red v2 with s converted to per-second (~5.0e-4)."""
    return CODE_RED_POPULATION * (CODE_RED_SCANS_PER_MINUTE / 60.0) / ADDRESS_SPACE


@dataclass(frozen=True)
class ScanContext:
    """Scenario parameters for rate calculations.

    Group-level metrics resolve in this order: explicit overrides (injected
    table values), then `dist` (coarsened as needed), then `hosts`.
    """

    s: float
    N: int
    omega: float = float(ADDRESS_SPACE)
    dist: GroupDistribution | None = None
    hosts: HostSet | None = None
    beta_overrides: Mapping[int, float] | None = None
    max_p_overrides: Mapping[int, float] | None = None

    def __post_init__(self):
        if not self.s > 0:
            raise ParameterError(f"scanning rate s must be > 0, got {self.s}")
        if self.N < 1:
            raise ParameterError(f"population N must be >= 1, got {self.N}")
        if self.omega < self.N:
            raise ParameterError("address-space size omega must be >= N")

    def _dist_at(self, l: int) -> GroupDistribution | None:
        if self.dist is not None and self.dist.l >= l:
            return self.dist.coarsen(l)
        if self.hosts is not None:
            return aggregate(self.hosts, l)
        return None

    def beta_at(self, l: int) -> float:
        if self.beta_overrides is not None and l in self.beta_overrides:
            return float(self.beta_overrides[l])
        d = self._dist_at(l)
        if d is None:
            raise ParameterError(f"no source for beta({l}): supply hosts, a distribution at l >= {l}, or an override")
        return non_uniformity_factor(d).beta

    def max_p_at(self, l: int) -> float:
        if self.max_p_overrides is not None and l in self.max_p_overrides:
            return float(self.max_p_overrides[l])
        d = self._dist_at(l)
        if d is None:
            raise ParameterError(f"no source for max p at l={l}: supply hosts, a distribution, or an override")
        return d.max_probability


def alpha_rs(ctx: ScanContext) -> float:
    return ctx.s * ctx.N / ctx.omega


def collision_probability(dist: GroupDistribution, q: np.ndarray) -> float:
    """p_h = sum_j p_g(j) * q_g(j) for a dense group-selection vector q."""
    if dist.total == 0:
        raise ParameterError("collision probability needs a non-empty distribution")
    qv = np.asarray(q, dtype=np.float64).reshape(-1)
    if qv.size != dist.n_groups:
        raise ParameterError(f"q has length {qv.size}, expected 2**{dist.l}")
    p = dist.probabilities_occupied()
    return math.fsum(float(pi) * float(qv[gi]) for pi, gi in zip(p, dist.indices))


@dataclass(frozen=True)
class RateReport:
    """Analytical rate of one strategy in one context.

    `uncertainty_bits` = -log2(p_h); `info_bits` = l - uncertainty_bits (the
    group identity is an l-bit secret; RS learns none of it).  `alpha_stage1`
    is set only for MSS, whose random phase runs at the RS rate.
    """

    strategy: str
    l: int
    collision_probability: float
    uncertainty_bits: float
    info_bits: float
    alpha: float
    alpha_stage1: float | None = None


def _collision_for(strategy: ScanStrategy, ctx: ScanContext) -> float:
    kind, l = strategy.kind, strategy.l
    scale = math.ldexp(1.0, -l)
    if kind == "rs":
        return scale
    if kind == "is":
        if strategy.q_g is not None:
            d = ctx._dist_at(l)
            if d is None:
                raise ParameterError("is with an explicit q_g needs hosts or a distribution")
            return collision_probability(d, strategy.q_g)
        return ctx.beta_at(l) * scale
    if kind == "optis":
        return ctx.max_p_at(l)
    if kind == "ls":
        return (1.0 - strategy.p_a + strategy.p_a * ctx.beta_at(l)) * scale
    if kind == "2lls":
        boost = 1.0 - strategy.p_b - strategy.p_c + strategy.p_b * ctx.beta_at(8) + strategy.p_c * ctx.beta_at(16)
        return boost * scale
    # mss stage 2: expected hit density of a sweep anchored at a random
    # vulnerable host's block equals the q=p importance rate
    return ctx.beta_at(l) * scale


def alpha_for(strategy: ScanStrategy, ctx: ScanContext) -> RateReport:
    """Closed-form rate report; alpha = alpha_RS * 2**l * p_h throughout."""
    p_h = _collision_for(strategy, ctx)
    l = strategy.l
    base = alpha_rs(ctx)
    uncertainty = -math.log2(p_h) if p_h > 0 else math.inf
    return RateReport(
        strategy=strategy.label,
        l=l,
        collision_probability=p_h,
        uncertainty_bits=uncertainty,
        info_bits=l - uncertainty,
        alpha=base * math.ldexp(p_h, l),
        alpha_stage1=base if strategy.kind == "mss" else None,
    )


def rate_table(strategies: Iterable[ScanStrategy], ctx: ScanContext) -> list[RateReport]:
    return [alpha_for(st, ctx) for st in strategies]


def write_rates_csv(reports: Iterable[RateReport], path: str | Path, time_unit: str = "second") -> None:
    # strategy tokens contain commas, so these fields get quoted
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "uncertainty_bits", "info_bits", f"alpha_per_{time_unit}"])
        for r in reports:
            writer.writerow([r.strategy, repr(r.uncertainty_bits), repr(r.info_bits), repr(r.alpha)])


# -- defenses --------------------------------------------------------------


def pp_modified_alpha(strategy: ScanStrategy, ctx: ScanContext, d: float, p: float) -> float:
    """Rate of q=p importance scanning against proactive protection.

    A fraction d of hosts deploys; a deployed host looks vulnerable to a probe
    with probability p.  alpha = alpha_RS * beta(l) * (1 - d + d*p).
    """
    if strategy.kind != "is" or strategy.q_g is not None:
        raise ParameterError("proactive protection is modeled for is with q_g = p_g")
    if not 0.0 < d <= 1.0:
        raise ParameterError("deployment fraction d must be in (0, 1]")
    if not 0.0 <= p <= 1.0:
        raise ParameterError("apparent-vulnerability probability p must be in [0, 1]")
    return alpha_rs(ctx) * ctx.beta_at(strategy.l) * (1.0 - d + d * p)


def pp_requirement(beta: NonUniformity | float, d: float) -> float:
    """Largest p that pushes the protected rate down to alpha_RS or below.

    p_max = (1 - (1 - d) * beta) / (d * beta).  May be negative: then even
    p = 0 cannot reach the RS baseline at this deployment level.
    """
    b = beta.beta if isinstance(beta, NonUniformity) else float(beta)
    if not b >= 1.0:
        raise ParameterError(f"beta must be >= 1, got {b}")
    if not 0.0 < d <= 1.0:
        raise ParameterError("deployment fraction d must be in (0, 1]")
    return (1.0 - (1.0 - d) * b) / (d * b)


def pp_min_deployment(beta: NonUniformity | float) -> float:
    """Smallest deployment fraction d for which p = 0 meets the RS baseline."""
    b = beta.beta if isinstance(beta, NonUniformity) else float(beta)
    if not b >= 1.0:
        raise ParameterError(f"beta must be >= 1, got {b}")
    return 1.0 - 1.0 / b


def ipv6_alpha(s: float, N: int, beta32: float) -> float:
    """Rate of /32-level importance scanning in the 2**64 address space.

    beta32 is the non-uniformity factor of the host distribution over the
    2**32 top-level groups; alpha = (s * N / 2**64) * beta32.
    """
    if not s > 0 or N < 1:
        raise ParameterError("need s > 0 and N >= 1")
    if not beta32 >= 1.0:
        raise ParameterError("beta32 must be >= 1")
    return (s * N / IPV6_SPACE) * beta32
