"""Entropy-family metrics and the non-uniformity factor of a group
distribution.

For probabilities p_i over the 2**l groups (zero-count groups contribute
nothing):

    H_q     = (1 / (1 - q)) * log2(sum p_i**q)      order-q entropy
    H       = -sum p_i * log2(p_i)                  Shannon (q -> 1 limit)
    H_2     = -log2(sum p_i**2)                     collision entropy
    H_inf   = -log2(max p_i)                        min-entropy
    beta(l) = 2**l * sum p_i**2 = 2**(l - H_2)      non-uniformity factor

beta is 1 exactly for the uniform distribution over all groups and grows as
hosts cluster; it is capped by 2**l (a single occupied group).  All sums are
computed from exact integer counts where possible and with fsum otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .addrspace import GroupDistribution, HostSet, aggregate, check_prefix_level
from .errors import ParameterError

# Orders this close to 1 are rejected; the q -> 1 limit is shannon_entropy.
_Q_NEAR_ONE = 1e-6


def _require_hosts(dist: GroupDistribution) -> None:
    if dist.total == 0:
        raise ParameterError("entropy metrics need a non-empty distribution")


def _sum_c_log2_c(counts: np.ndarray) -> float:
    """sum c * log2(c) over counts, grouped by distinct value for accuracy."""
    vals, mult = np.unique(counts, return_counts=True)
    return math.fsum(float(m) * float(v) * math.log2(float(v)) for v, m in zip(vals, mult) if v > 1)


def shannon_entropy(dist: GroupDistribution) -> float:
    """Shannon entropy in bits: log2(N) - (1/N) * sum c_i * log2(c_i).

    Floored at 0: the exact value cannot be negative, but the two log terms
    can disagree by an ulp when a single group holds everything.
    """
    _require_hosts(dist)
    n = dist.total
    return max(0.0, math.log2(n) - _sum_c_log2_c(dist.counts) / n)


def min_entropy(dist: GroupDistribution) -> float:
    _require_hosts(dist)
    return math.log2(dist.total) - math.log2(dist.max_count)


def renyi_entropy(dist: GroupDistribution, q: float) -> float:
    """Order-q entropy in bits.

    q=0 gives log2(number of occupied groups), q=inf the min-entropy, q=2 the
    collision entropy (computed from the exact integer sum of squared counts).
    Orders within 1e-6 of 1 are rejected; use shannon_entropy for the limit.
    """
    _require_hosts(dist)
    if not q >= 0:
        raise ParameterError(f"entropy order must be >= 0, got {q}")
    if math.isinf(q):
        return min_entropy(dist)
    if abs(q - 1.0) < _Q_NEAR_ONE:
        raise ParameterError("order too close to 1; the limit is shannon_entropy")
    n = dist.total
    if q == 0:
        return math.log2(dist.occupied)
    if q == 2:
        return max(0.0, 2.0 * math.log2(n) - math.log2(dist.sum_sq_counts()))
    # factor out the largest probability so large q cannot underflow to 0
    p = dist.counts / n
    pmax = dist.max_count / n
    s = math.fsum((p / pmax) ** q)
    return max(0.0, (q * math.log2(pmax) + math.log2(s)) / (1.0 - q))


@dataclass(frozen=True)
class EntropyReport:
    """Entropy family of one distribution; h0 is log2(occupied support)."""

    l: int
    h0: float
    shannon: float
    h2: float
    h_inf: float


def entropy_report(dist: GroupDistribution) -> EntropyReport:
    return EntropyReport(
        l=dist.l,
        h0=renyi_entropy(dist, 0),
        shannon=shannon_entropy(dist),
        h2=renyi_entropy(dist, 2),
        h_inf=min_entropy(dist),
    )


@dataclass(frozen=True)
class NonUniformity:
    l: int
    beta: float


def non_uniformity_factor(dist: GroupDistribution) -> NonUniformity:
    """beta(l) = 2**l * sum p_i**2, computed as ldexp(ssq / N**2, l)."""
    _require_hosts(dist)
    n = dist.total
    return NonUniformity(l=dist.l, beta=math.ldexp(dist.sum_sq_counts() / (n * n), dist.l))


def l2_distance_to_uniform(dist: GroupDistribution) -> float:
    """sum over all 2**l groups of (p_i - 2**-l)**2, empty groups included.

    Satisfies beta = 2**l * distance + 1; computed term-by-term (not via that
    identity) so the identity stays a meaningful check.
    """
    _require_hosts(dist)
    u = math.ldexp(1.0, -dist.l)
    p = dist.counts / dist.total
    occupied_terms = math.fsum((pi - u) ** 2 for pi in p)
    empty = (1 << dist.l) - dist.occupied
    return occupied_terms + empty * u * u


def _level_counts(addr_sorted: np.ndarray, l: int) -> np.ndarray:
    """Run lengths of the level-l group ids of sorted addresses."""
    if l == 0:
        return np.array([addr_sorted.size], dtype=np.int64)
    g = addr_sorted >> np.int64(32 - l)
    change = np.flatnonzero(g[1:] != g[:-1])
    starts = np.r_[0, change + 1]
    ends = np.r_[starts[1:], g.size]
    return (ends - starts).astype(np.int64)


def beta_profile(hosts: HostSet, l_max: int) -> list[tuple[int, float]]:
    """[(l, beta(l))] for l = 0..l_max over the host set's aggregations."""
    l_max = check_prefix_level(l_max)
    if hosts.N == 0:
        raise ParameterError("beta profile needs a non-empty host set")
    addr = hosts.addresses.astype(np.int64)
    n = hosts.N
    out = []
    for l in range(l_max + 1):
        c = _level_counts(addr, l)
        ssq = int(np.dot(c, c)) if n < (1 << 31) else int(sum(int(v) * int(v) for v in c))
        out.append((l, math.ldexp(ssq / (n * n), l)))
    return out


def shannon_profile(hosts: HostSet, l_max: int) -> list[tuple[int, float]]:
    """[(l, H(l))] for l = 0..l_max; non-decreasing in l with steps <= 1."""
    l_max = check_prefix_level(l_max)
    if hosts.N == 0:
        raise ParameterError("shannon profile needs a non-empty host set")
    addr = hosts.addresses.astype(np.int64)
    n = hosts.N
    log2n = math.log2(n)
    out = []
    for l in range(l_max + 1):
        c = _level_counts(addr, l)
        out.append((l, log2n - _sum_c_log2_c(c) / n))
    return out


def profiles_from_distribution(dist: GroupDistribution) -> tuple[list[tuple[int, float]], list[tuple[int, float]]]:
    """(beta profile, shannon profile) for l = 0..dist.l via re-aggregation."""
    _require_hosts(dist)
    betas, shannons = [], []
    for l in range(dist.l + 1):
        d = dist.coarsen(l)
        betas.append((l, non_uniformity_factor(d).beta))
        shannons.append((l, shannon_entropy(d)))
    return betas, shannons


def beta_for_hosts(hosts: HostSet, l: int) -> NonUniformity:
    """Convenience: aggregate then compute beta at one level."""
    return non_uniformity_factor(aggregate(hosts, l))
