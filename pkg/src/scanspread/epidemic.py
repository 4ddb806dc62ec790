"""Outbreak simulation: Monte Carlo early-stage rate estimation and a
deterministic per-subnet mean-field model.

Early stage.  One infected scanner draws `total_scans` targets; each run
counts probes that land on vulnerable hosts (with multiplicity) and yields a
rate estimate hits * s / total_scans.  Runs are independent: run i uses the
i-th child stream spawned from the master seed, so results are reproducible
and independent of the thread count.

Full dynamics.  Time advances in ticks.  With n_t infected in total and m_i
infected in /l group i, each (source, target-group) pair has a per-scan
probability q of hitting one specific address; a target address survives a
tick with probability prod (1 - q)**(s * sources * tick), so

    m_i(t+1) = m_i(t) + (N_i - m_i(t)) * (1 - survival_i(t))

computed with log1p/expm1.  When every source scans by the same group law
(rs/is/optis) survival_i depends only on n_t and the recursion summed over
groups reduces exactly to the single-population form

    n(t+1) = n(t) + (N - n(t)) * (1 - (1 - 1/omega)**(s * n(t) * tick))

for uniform q.  LS and 2LLS scanners aim differently at their own block, so
survival splits into per-source-location factors (home vs elsewhere, and for
2LLS same /16, same /8, elsewhere).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .addrspace import (
    ADDRESS_BITS,
    ADDRESS_SPACE,
    GroupDistribution,
    HostSet,
    aggregate,
    materialize_hosts,
)
from .errors import ParameterError, UnsupportedStrategyError
from .strategies import ScanStrategy, group_scan_distribution


@dataclass(frozen=True)
class EarlyStageConfig:
    """Inputs of a Monte Carlo early-stage estimate.

    Hosts come either from `hosts` directly or by materializing `dist` with
    `materialize_seed`.  `seed` drives the per-run streams.
    """

    strategy: ScanStrategy
    s: float
    total_scans: int
    runs: int
    seed: int
    hosts: HostSet | None = None
    dist: GroupDistribution | None = None
    materialize_seed: int | None = None
    threads: int = 1
    record_hits: bool = False

    def __post_init__(self):
        if not self.s > 0:
            raise ParameterError("scanning rate s must be > 0")
        if self.total_scans < 1:
            raise ParameterError("total_scans must be >= 1")
        if self.runs < 2:
            raise ParameterError("need runs >= 2 for a sample variance")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")
        if self.hosts is None and self.dist is None:
            raise ParameterError("supply hosts or a distribution to materialize")
        if self.hosts is None and self.materialize_seed is None:
            raise ParameterError("materializing a distribution needs materialize_seed")


@dataclass(frozen=True)
class EarlyStageResult:
    strategy: str
    total_scans: int
    runs: int
    seed: int
    mean_alpha: float
    var_alpha: float
    per_run_hits: np.ndarray | None = None

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.var_alpha / self.runs))


def _resolve_hosts(cfg: EarlyStageConfig) -> HostSet:
    hosts = cfg.hosts if cfg.hosts is not None else materialize_hosts(cfg.dist, cfg.materialize_seed)
    if hosts.N == 0:
        raise ParameterError("simulation needs at least one vulnerable host")
    return hosts


def _dist_for(cfg: EarlyStageConfig, hosts: HostSet, l: int) -> GroupDistribution:
    if cfg.dist is not None and cfg.dist.l >= l:
        return cfg.dist.coarsen(l)
    return aggregate(hosts, l)


class _EarlyEngine:
    """Per-strategy vectorized single-run kernel, shared across threads."""

    def __init__(self, cfg: EarlyStageConfig, hosts: HostSet):
        st = cfg.strategy
        self.kind = st.kind
        self.strategy = st
        self.hosts = hosts
        self.addr = hosts.addresses.astype(np.int64)
        self.N = hosts.N
        self.total = cfg.total_scans
        self.bits = ADDRESS_BITS - st.l
        self.block = 1 << self.bits
        self.cum = None
        self.opt_base = None
        if st.kind == "is":
            q = st.q_g if st.q_g is not None else _dist_for(cfg, hosts, st.l).dense_probabilities()
            self.cum = np.cumsum(q)
        elif st.kind == "optis":
            self.opt_base = _dist_for(cfg, hosts, st.l).argmax_index << self.bits

    def run(self, rng: np.random.Generator) -> int:
        n = self.total
        kind = self.kind
        if kind == "rs":
            return self.hosts.count_members(rng.integers(0, ADDRESS_SPACE, size=n, dtype=np.int64))
        if kind == "is":
            g = np.searchsorted(self.cum, rng.random(n), side="right")
            np.minimum(g, self.cum.size - 1, out=g)
            t = (g.astype(np.int64) << self.bits) + rng.integers(0, self.block, size=n, dtype=np.int64)
            return self.hosts.count_members(t)
        if kind == "optis":
            return self.hosts.count_members(self.opt_base + rng.integers(0, self.block, size=n, dtype=np.int64))
        if kind == "ls":
            home = int(self.addr[rng.integers(0, self.N)]) >> self.bits << self.bits
            local = rng.random(n) < self.strategy.p_a
            k = int(np.count_nonzero(local))
            t = np.empty(n, dtype=np.int64)
            t[local] = home + rng.integers(0, self.block, size=k, dtype=np.int64)
            t[~local] = rng.integers(0, ADDRESS_SPACE, size=n - k, dtype=np.int64)
            return self.hosts.count_members(t)
        if kind == "2lls":
            a = int(self.addr[rng.integers(0, self.N)])
            home16 = a >> 16 << 16
            home8 = a >> 24 << 24
            u = rng.random(n)
            in16 = u < self.strategy.p_c
            in8 = (~in16) & (u < self.strategy.p_c + self.strategy.p_b)
            k16 = int(np.count_nonzero(in16))
            k8 = int(np.count_nonzero(in8))
            t = np.empty(n, dtype=np.int64)
            t[in16] = home16 + rng.integers(0, 1 << 16, size=k16, dtype=np.int64)
            t[in8] = home8 + rng.integers(0, 1 << 24, size=k8, dtype=np.int64)
            rest = ~(in16 | in8)
            t[rest] = rng.integers(0, ADDRESS_SPACE, size=n - k16 - k8, dtype=np.int64)
            return self.hosts.count_members(t)
        # mss, stage 2 in isolation: sweep anchored at a random vulnerable
        # host's block, starting just past it.  Sequential scanning is
        # deterministic given the anchor, so hits are an exact interval count.
        anchor = int(self.addr[rng.integers(0, self.N)])
        return _sweep_hits(self.hosts, anchor, self.bits, n)


def _sweep_hits(hosts: HostSet, anchor: int, bits: int, n_scans: int) -> int:
    """Hits of a cyclic ascending sweep of anchor's block, from anchor+1."""
    block = 1 << bits
    start = (anchor >> bits) << bits
    offset = (anchor - start + 1) % block
    full, rem = divmod(n_scans, block)
    hits = full * hosts.count_in_interval(start, start + block) if full else 0
    if rem:
        end = offset + rem
        if end <= block:
            hits += hosts.count_in_interval(start + offset, start + end)
        else:
            hits += hosts.count_in_interval(start + offset, start + block)
            hits += hosts.count_in_interval(start, start + end - block)
    return hits


def _run_all(engine_run, streams, threads: int) -> np.ndarray:
    hits = np.zeros(len(streams), dtype=np.int64)

    def work(i: int) -> None:
        hits[i] = engine_run(np.random.default_rng(streams[i]))

    if threads == 1:
        for i in range(len(streams)):
            work(i)
    else:
        chunk = max(1, len(streams) // (threads * 8))
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(len(streams)), chunksize=chunk))
    return hits


def estimate_infection_rate(cfg: EarlyStageConfig) -> EarlyStageResult:
    """Monte Carlo estimate of the early-stage rate of cfg.strategy.

    Per run, alpha_hat = hits * s / total_scans; reports the sample mean and
    sample variance (ddof=1) over runs.  MSS here measures the sequential
    stage alone (sweep anchored at a random vulnerable host).
    """
    hosts = _resolve_hosts(cfg)
    engine = _EarlyEngine(cfg, hosts)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    hits = _run_all(engine.run, streams, cfg.threads)
    scale = cfg.s / cfg.total_scans
    return EarlyStageResult(
        strategy=cfg.strategy.label,
        total_scans=cfg.total_scans,
        runs=cfg.runs,
        seed=cfg.seed,
        mean_alpha=float(hits.mean()) * scale,
        var_alpha=float(hits.var(ddof=1)) * scale * scale,
        per_run_hits=hits if cfg.record_hits else None,
    )


def estimate_mss_full(cfg: EarlyStageConfig, scan_budgets: list[int]) -> list[EarlyStageResult]:
    """MSS from a cold start, one result per scan budget.

    Each run scans uniformly until the first hit (stage length drawn
    geometrically, the hit host uniform among the vulnerable), then sweeps
    that host's block with whatever budget remains.  Runs out of budget
    before the first hit count zero.
    """
    if cfg.strategy.kind != "mss":
        raise ParameterError("estimate_mss_full is only defined for mss")
    if not scan_budgets or any(int(b) < 1 for b in scan_budgets):
        raise ParameterError("scan budgets must be positive integers")
    hosts = _resolve_hosts(cfg)
    addr = hosts.addresses.astype(np.int64)
    bits = ADDRESS_BITS - cfg.strategy.l
    p_first = hosts.N / ADDRESS_SPACE
    budget_seqs = np.random.SeedSequence(cfg.seed).spawn(len(scan_budgets))
    out = []
    for budget, seq in zip(scan_budgets, budget_seqs):
        budget = int(budget)

        def run(rng: np.random.Generator, budget: int = budget) -> int:
            stage1 = int(rng.geometric(p_first))
            if stage1 > budget:
                return 0
            anchor = int(addr[rng.integers(0, hosts.N)])
            return 1 + _sweep_hits(hosts, anchor, bits, budget - stage1)

        hits = _run_all(run, seq.spawn(cfg.runs), cfg.threads)
        scale = cfg.s / budget
        out.append(
            EarlyStageResult(
                strategy=cfg.strategy.label,
                total_scans=budget,
                runs=cfg.runs,
                seed=cfg.seed,
                mean_alpha=float(hits.mean()) * scale,
                var_alpha=float(hits.var(ddof=1)) * scale * scale,
                per_run_hits=hits if cfg.record_hits else None,
            )
        )
    return out


# -- deterministic per-subnet dynamics -------------------------------------


@dataclass(frozen=True)
class EpidemicConfig:
    """Inputs of the mean-field outbreak model.

    `horizon` is the number of ticks; `initial` is a group index or
    "densest" (the most-populated group, ties to the lowest index).  `pp`
    optionally applies a proactive-protection factor (d, p) to every new
    infection.
    """

    strategy: ScanStrategy
    dist: GroupDistribution
    s: float
    horizon: int
    tick: float = 1.0
    initial: int | str = "densest"
    pp: tuple[float, float] | None = None
    record_per_subnet: bool = False

    def __post_init__(self):
        if not self.s > 0 or not self.tick > 0:
            raise ParameterError("need s > 0 and tick > 0")
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1 tick")
        if self.pp is not None:
            d, p = self.pp
            if not 0.0 < d <= 1.0 or not 0.0 <= p <= 1.0:
                raise ParameterError("pp needs d in (0, 1] and p in [0, 1]")


@dataclass(frozen=True)
class EpidemicTrace:
    strategy: str
    l: int
    s: float
    tick: float
    total_population: int
    n: np.ndarray
    per_subnet: np.ndarray | None = None

    def times(self) -> np.ndarray:
        return np.arange(self.n.size) * self.tick


def propagate(cfg: EpidemicConfig) -> EpidemicTrace:
    """Run the per-subnet recursion for cfg.horizon ticks.

    Infected counts are real-valued (mean-field); n[0] = 1 seeded in the
    initial group.  MSS is stateful per scanner and has no group law, so it
    is not representable here.
    """
    st = cfg.strategy
    if st.kind == "mss":
        raise UnsupportedStrategyError("mss has no mean-field group law; use the Monte Carlo engines")
    l = st.l
    if cfg.dist.l < l:
        raise ParameterError(f"distribution at l={cfg.dist.l} cannot drive a strategy at l={l}")
    dist = cfg.dist.coarsen(l)
    if dist.total == 0:
        raise ParameterError("empty distribution")
    pop = dist.dense_counts().astype(np.float64)
    m_groups = pop.size
    if cfg.initial == "densest":
        i0 = dist.argmax_index
    else:
        i0 = int(cfg.initial)
        if not 0 <= i0 < m_groups:
            raise ParameterError(f"initial group {i0} out of range for l={l}")
        if pop[i0] < 1:
            raise ParameterError(f"initial group {i0} has no vulnerable hosts")
    bits = ADDRESS_BITS - l
    block = float(1 << bits)
    s_tick = cfg.s * cfg.tick
    pp_factor = 1.0
    if cfg.pp is not None:
        d, p = cfg.pp
        pp_factor = 1.0 - d + d * p

    m = np.zeros(m_groups)
    m[i0] = 1.0
    n_series = np.empty(cfg.horizon + 1)
    n_series[0] = 1.0
    per_subnet = None
    if cfg.record_per_subnet:
        per_subnet = np.empty((cfg.horizon + 1, m_groups))
        per_subnet[0] = m

    if st.kind in ("rs", "is", "optis"):
        q = group_scan_distribution(st, dist=dist)
        log_surv = np.log1p(-q / block)  # per scan, one specific address
        for t in range(1, cfg.horizon + 1):
            n = m.sum()
            inc = (pop - m) * (-np.expm1(s_tick * n * log_surv))
            m = np.minimum(m + pp_factor * inc, pop)
            n_series[t] = m.sum()
            if per_subnet is not None:
                per_subnet[t] = m
    elif st.kind == "ls":
        c_home = np.log1p(-(st.p_a / block + (1.0 - st.p_a) / ADDRESS_SPACE))
        c_away = np.log1p(-(1.0 - st.p_a) / ADDRESS_SPACE)
        for t in range(1, cfg.horizon + 1):
            n = m.sum()
            log_surv = s_tick * (m * c_home + (n - m) * c_away)
            inc = (pop - m) * (-np.expm1(log_surv))
            m = np.minimum(m + pp_factor * inc, pop)
            n_series[t] = m.sum()
            if per_subnet is not None:
                per_subnet[t] = m
    else:  # 2lls at l=16
        r = 1.0 - st.p_b - st.p_c
        c_16 = np.log1p(-(st.p_c / (1 << 16) + st.p_b / (1 << 24) + r / ADDRESS_SPACE))
        c_8 = np.log1p(-(st.p_b / (1 << 24) + r / ADDRESS_SPACE))
        c_far = np.log1p(-r / ADDRESS_SPACE)
        for t in range(1, cfg.horizon + 1):
            n = m.sum()
            m8 = np.repeat(m.reshape(256, 256).sum(axis=1), 256)
            log_surv = s_tick * (m * c_16 + (m8 - m) * c_8 + (n - m8) * c_far)
            inc = (pop - m) * (-np.expm1(log_surv))
            m = np.minimum(m + pp_factor * inc, pop)
            n_series[t] = m.sum()
            if per_subnet is not None:
                per_subnet[t] = m

    return EpidemicTrace(
        strategy=st.label,
        l=l,
        s=cfg.s,
        tick=cfg.tick,
        total_population=dist.total,
        n=n_series,
        per_subnet=per_subnet,
    )


def time_to_fraction(trace: EpidemicTrace, fraction: float) -> float | None:
    """First time n(t) reaches fraction * N, linearly interpolated between
    ticks; None if the trace never gets there.
    """
    if not 0.0 < fraction <= 1.0:
        raise ParameterError("fraction must be in (0, 1]")
    target = fraction * trace.total_population
    n = trace.n
    if n[0] >= target:
        return 0.0
    above = np.flatnonzero(n >= target)
    if above.size == 0:
        return None
    k = int(above[0])
    frac = (target - n[k - 1]) / (n[k] - n[k - 1])
    return (k - 1 + float(frac)) * trace.tick
