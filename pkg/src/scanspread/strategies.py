"""Scanning strategies and their target-selection laws.

Six strategies are modeled.  Except for MSS they are memoryless: each scan
picks a /l group j with probability q_g(j), then an address uniformly inside
that block.

    rs     uniform over the whole space (q_g uniform)
    is     importance scanning: q_g supplied explicitly, or q_g = p_g (the
           vulnerable-host distribution itself) when none is given
    optis  all scans into the group with the largest p_g
    ls     localized: probability p_a into the scanner's home /l block,
           the rest uniform over the space
    2lls   two-level localized at /16: p_c into the home /16, p_b uniform
           over the home /8, the rest uniform over the space
    mss    modified sequential: uniform scanning until the first hit, then
           cyclic ascending sweep of the hit's /l block starting just past it

Strategy tokens (CLI and file outputs) look like `ls:l=16,pa=0.75`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .addrspace import ADDRESS_BITS, ADDRESS_SPACE, GroupDistribution, check_prefix_level
from .errors import ParameterError, UnsupportedStrategyError

KINDS = ("rs", "is", "optis", "ls", "2lls", "mss")

# group-probability vectors are only materialized densely up to this level
MAX_VECTOR_LEVEL = 16


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True, eq=False)
class ScanStrategy:
    """Immutable description of one scanning strategy.

    Use the constructors (`rs`, `importance`, `optimal`, `localized`,
    `two_level`, `sequential`) or `parse_strategy` rather than building
    instances by hand.
    """

    kind: str
    l: int = 16
    q_g: np.ndarray | None = field(default=None, repr=False)
    p_a: float | None = None
    p_b: float | None = None
    p_c: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown strategy kind {self.kind!r}; valid: {', '.join(KINDS)}")
        check_prefix_level(self.l)
        if self.kind == "2lls" and self.l != 16:
            raise ParameterError("2lls is defined at l=16")
        if self.q_g is not None:
            if self.kind != "is":
                raise ParameterError("explicit q_g is only meaningful for kind 'is'")
            if self.l > MAX_VECTOR_LEVEL:
                raise ParameterError(f"explicit q_g needs l <= {MAX_VECTOR_LEVEL}")
            q = np.asarray(self.q_g, dtype=np.float64).reshape(-1)
            if q.size != (1 << self.l):
                raise ParameterError(f"q_g must have length 2**{self.l}")
            if np.any(q < 0) or abs(float(q.sum()) - 1.0) > 1e-9:
                raise ParameterError("q_g must be non-negative and sum to 1")
            q.flags.writeable = False
            object.__setattr__(self, "q_g", q)
        if self.kind == "ls":
            if self.p_a is None or not 0.0 <= self.p_a <= 1.0:
                raise ParameterError("ls needs p_a in [0, 1]")
        if self.kind == "2lls":
            if self.p_b is None or self.p_c is None:
                raise ParameterError("2lls needs p_b and p_c")
            if self.p_b < 0 or self.p_c < 0 or self.p_b + self.p_c > 1.0 + 1e-12:
                raise ParameterError("2lls needs p_b, p_c >= 0 with p_b + p_c <= 1")

    # -- constructors ------------------------------------------------------

    @classmethod
    def rs(cls, l: int = 16) -> "ScanStrategy":
        """Random scanning; l only sets the reporting prefix level."""
        return cls("rs", l=l)

    @classmethod
    def importance(cls, l: int, q_g=None) -> "ScanStrategy":
        """Importance scanning; q_g = p_g when no vector is given."""
        return cls("is", l=l, q_g=q_g)

    @classmethod
    def optimal(cls, l: int) -> "ScanStrategy":
        return cls("optis", l=l)

    @classmethod
    def localized(cls, l: int, p_a: float) -> "ScanStrategy":
        return cls("ls", l=l, p_a=p_a)

    @classmethod
    def two_level(cls, p_b: float, p_c: float) -> "ScanStrategy":
        return cls("2lls", l=16, p_b=p_b, p_c=p_c)

    @classmethod
    def sequential(cls, l: int) -> "ScanStrategy":
        return cls("mss", l=l)

    # -- token form --------------------------------------------------------

    @property
    def label(self) -> str:
        """Canonical token; parse_strategy(label) round-trips."""
        if self.kind == "rs":
            return "rs" if self.l == 16 else f"rs:l={self.l}"
        if self.kind == "is":
            return f"is:l={self.l}"
        if self.kind == "optis":
            return f"optis:l={self.l}"
        if self.kind == "ls":
            return f"ls:l={self.l},pa={_fmt(self.p_a)}"
        if self.kind == "2lls":
            return f"2lls:pb={_fmt(self.p_b)},pc={_fmt(self.p_c)}"
        return f"mss:l={self.l}"


_PARAM_KEYS = {
    "rs": {"l"},
    "is": {"l"},
    "optis": {"l"},
    "ls": {"l", "pa"},
    "2lls": {"pb", "pc"},
    "mss": {"l"},
}


def parse_strategy(token: str) -> ScanStrategy:
    """Parse a strategy token such as `rs`, `is:l=16` or `ls:l=16,pa=0.75`."""
    text = token.strip()
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ParameterError(f"unknown strategy {token!r}; valid kinds: {', '.join(KINDS)}")
    params: dict[str, str] = {}
    if rest:
        for part in rest.split(","):
            key, sep, val = part.partition("=")
            key = key.strip()
            if not sep or key not in _PARAM_KEYS[kind]:
                raise ParameterError(
                    f"bad parameter {part.strip()!r} in {token!r}; "
                    f"{kind} accepts: {', '.join(sorted(_PARAM_KEYS[kind])) or 'none'}"
                )
            if key in params:
                raise ParameterError(f"duplicate parameter {key!r} in {token!r}")
            params[key] = val.strip()
    try:
        if kind == "rs":
            return ScanStrategy.rs(l=int(params.get("l", 16)))
        if kind == "is":
            return ScanStrategy.importance(l=int(params["l"]))
        if kind == "optis":
            return ScanStrategy.optimal(l=int(params["l"]))
        if kind == "ls":
            return ScanStrategy.localized(l=int(params["l"]), p_a=float(params["pa"]))
        if kind == "2lls":
            return ScanStrategy.two_level(p_b=float(params["pb"]), p_c=float(params["pc"]))
        return ScanStrategy.sequential(l=int(params["l"]))
    except KeyError as exc:
        raise ParameterError(f"strategy {token!r} is missing parameter {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ParameterError(f"bad value in strategy token {token!r}: {exc}") from None


def _resolve_p(dist: GroupDistribution | None, l: int, what: str) -> GroupDistribution:
    if dist is None:
        raise ParameterError(f"{what} needs a host distribution")
    if dist.l < l:
        raise ParameterError(f"{what} needs a distribution at l >= {l}, got l={dist.l}")
    return dist.coarsen(l)


def group_scan_distribution(
    strategy: ScanStrategy,
    home_subnet: int | None = None,
    dist: GroupDistribution | None = None,
) -> np.ndarray:
    """Dense q_g vector (length 2**l) of one scan's group-selection law.

    `home_subnet` is the scanner's group index at the strategy level (the /16
    index for 2lls).  MSS has no per-scan group law and is rejected.
    """
    kind, l = strategy.kind, strategy.l
    if kind == "mss":
        raise UnsupportedStrategyError("mss is stateful; it has no per-scan group distribution")
    if l > MAX_VECTOR_LEVEL:
        raise ParameterError(f"dense q_g vector infeasible for l={l} (max {MAX_VECTOR_LEVEL})")
    m = 1 << l
    if kind == "rs":
        return np.full(m, 1.0 / m)
    if kind == "is":
        if strategy.q_g is not None:
            return strategy.q_g.copy()
        return _resolve_p(dist, l, "is with q_g = p_g").dense_probabilities()
    if kind == "optis":
        d = _resolve_p(dist, l, "optis")
        q = np.zeros(m)
        q[d.argmax_index] = 1.0
        return q
    if kind == "ls":
        if home_subnet is None or not 0 <= home_subnet < m:
            raise ParameterError(f"ls needs a home group index in [0, 2**{l})")
        q = np.full(m, (1.0 - strategy.p_a) / m)
        q[home_subnet] += strategy.p_a
        return q
    # 2lls at l=16: home /16 plus uniform over the home /8's 256 children
    if home_subnet is None or not 0 <= home_subnet < m:
        raise ParameterError("2lls needs a home /16 group index in [0, 2**16)")
    r = 1.0 - strategy.p_b - strategy.p_c
    q = np.full(m, r / m)
    home8 = home_subnet >> 8
    q[home8 << 8 : (home8 + 1) << 8] += strategy.p_b / 256.0
    q[home_subnet] += strategy.p_c
    return q


class ScannerState:
    """Mutable per-scanner state; yields one target address per call.

    Only MSS actually carries state (random phase until the first hit, then a
    cyclic sweep of the hit's block); the other strategies are memoryless and
    `on_hit` is a no-op for them.
    """

    __slots__ = (
        "strategy", "rng", "bits", "block",
        "_cum", "_base", "_home_base", "_home16", "_home8",
        "phase", "block_start", "cursor",
    )

    def __init__(self, strategy: ScanStrategy, rng: np.random.Generator,
                 home_subnet: int | None = None, dist: GroupDistribution | None = None):
        self.strategy = strategy
        self.rng = rng
        self.bits = ADDRESS_BITS - strategy.l
        self.block = 1 << self.bits
        self._cum = None
        self._base = None
        self._home_base = None
        self._home16 = None
        self._home8 = None
        self.phase = "random"
        self.block_start = None
        self.cursor = None
        kind = strategy.kind
        if kind == "is":
            q = strategy.q_g
            if q is None:
                q = _resolve_p(dist, strategy.l, "is with q_g = p_g").dense_probabilities()
            self._cum = np.cumsum(q)
        elif kind == "optis":
            d = _resolve_p(dist, strategy.l, "optis")
            self._base = d.argmax_index << self.bits
        elif kind == "ls":
            if home_subnet is None or not 0 <= home_subnet < (1 << strategy.l):
                raise ParameterError(f"ls needs a home group index in [0, 2**{strategy.l})")
            self._home_base = home_subnet << self.bits
        elif kind == "2lls":
            if home_subnet is None or not 0 <= home_subnet < (1 << 16):
                raise ParameterError("2lls needs a home /16 group index")
            self._home16 = home_subnet << 16
            self._home8 = (home_subnet >> 8) << 24

    def next_target(self) -> int:
        """Draw the next target address."""
        rng = self.rng
        kind = self.strategy.kind
        if kind == "rs":
            return int(rng.integers(0, ADDRESS_SPACE))
        if kind == "is":
            g = int(np.searchsorted(self._cum, rng.random(), side="right"))
            g = min(g, self._cum.size - 1)
            return (g << self.bits) + int(rng.integers(0, self.block))
        if kind == "optis":
            return self._base + int(rng.integers(0, self.block))
        if kind == "ls":
            if rng.random() < self.strategy.p_a:
                return self._home_base + int(rng.integers(0, self.block))
            return int(rng.integers(0, ADDRESS_SPACE))
        if kind == "2lls":
            u = rng.random()
            if u < self.strategy.p_c:
                return self._home16 + int(rng.integers(0, 1 << 16))
            if u < self.strategy.p_c + self.strategy.p_b:
                return self._home8 + int(rng.integers(0, 1 << 24))
            return int(rng.integers(0, ADDRESS_SPACE))
        # mss
        if self.phase == "random":
            return int(rng.integers(0, ADDRESS_SPACE))
        target = self.block_start + self.cursor
        self.cursor = (self.cursor + 1) % self.block
        return target

    def on_hit(self, address: int) -> None:
        """Report a successful probe; only MSS reacts (once)."""
        if self.strategy.kind != "mss" or self.phase == "sequential":
            return
        self.phase = "sequential"
        self.block_start = (address >> self.bits) << self.bits
        self.cursor = (address - self.block_start + 1) % self.block

    def draw_targets(self, n: int) -> np.ndarray:
        """Vectorized batch of n targets (int64).

        Follows the same per-scan law as next_target but consumes the stream
        differently, so batches and single draws are not interleavable.  For
        MSS in the sequential phase the batch does not transition state.
        """
        rng = self.rng
        kind = self.strategy.kind
        if kind == "rs" or (kind == "mss" and self.phase == "random"):
            return rng.integers(0, ADDRESS_SPACE, size=n, dtype=np.int64)
        if kind == "is":
            g = np.searchsorted(self._cum, rng.random(n), side="right")
            np.minimum(g, self._cum.size - 1, out=g)
            return (g.astype(np.int64) << self.bits) + rng.integers(0, self.block, size=n, dtype=np.int64)
        if kind == "optis":
            return self._base + rng.integers(0, self.block, size=n, dtype=np.int64)
        if kind == "ls":
            local = rng.random(n) < self.strategy.p_a
            k = int(np.count_nonzero(local))
            out = np.empty(n, dtype=np.int64)
            out[local] = self._home_base + rng.integers(0, self.block, size=k, dtype=np.int64)
            out[~local] = rng.integers(0, ADDRESS_SPACE, size=n - k, dtype=np.int64)
            return out
        if kind == "2lls":
            u = rng.random(n)
            in16 = u < self.strategy.p_c
            in8 = (~in16) & (u < self.strategy.p_c + self.strategy.p_b)
            out = np.empty(n, dtype=np.int64)
            k16 = int(np.count_nonzero(in16))
            k8 = int(np.count_nonzero(in8))
            out[in16] = self._home16 + rng.integers(0, 1 << 16, size=k16, dtype=np.int64)
            out[in8] = self._home8 + rng.integers(0, 1 << 24, size=k8, dtype=np.int64)
            rest = ~(in16 | in8)
            out[rest] = rng.integers(0, ADDRESS_SPACE, size=n - k16 - k8, dtype=np.int64)
            return out
        # mss sequential sweep
        offs = (self.cursor + np.arange(n, dtype=np.int64)) % self.block
        self.cursor = int((self.cursor + n) % self.block)
        return self.block_start + offs
