"""Simulated channels.

``LocalOrdered`` is a FIFO, exactly-once pipe that releases a message on the
tick after it was enqueued.  ``NetworkAdversarial`` garbles delivery: every
message gets a seeded schedule of one or more copies, each released somewhere
in ``(enqueue_tick, enqueue_tick + max_delay_ticks]``, and all copies released
on the same tick come out in a seeded shuffle.  Nothing is ever dropped.

All randomness comes from SplitMix64 (Steele, Lea & Flood 2014), chosen
because it is a few lines of 64-bit integer arithmetic and therefore yields
the same streams in any language.  A message's schedule depends only on the
channel seed and the message's sequence number on that channel.
"""

from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, prod
from typing import Any, List, Optional, Tuple, Union

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n) by modulo reduction (bias < 2**-58 for small n)."""
        return self.next_u64() % n

    def chance(self, p) -> bool:
        """True with probability ``p`` (exact rational comparison on a 53-bit draw)."""
        if not isinstance(p, Fraction):
            p = Fraction(p)
        if p <= 0:
            return False
        if p >= 1:
            return True
        u = self.next_u64() >> 11
        return u * p.denominator < p.numerator * (1 << 53)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *parts: Union[int, str]) -> int:
    """Mix ``parts`` into ``seed``; strings contribute their CRC-32."""
    state = seed & MASK64
    for part in parts:
        if isinstance(part, str):
            part = zlib.crc32(part.encode("utf-8"))
        state = SplitMix64(state ^ ((part * GOLDEN) & MASK64)).next_u64()
    return state


@dataclass(frozen=True)
class LocalOrdered:
    pass


@dataclass(frozen=True)
class NetworkAdversarial:
    seed: int = 0
    max_delay_ticks: int = 5
    dup_prob: Any = Fraction(1, 4)
    max_dups: int = 2
    batch_prob: Any = Fraction(1, 4)

    def __post_init__(self):
        if self.max_delay_ticks < 1:
            raise ValueError("max_delay_ticks must be at least 1")
        if self.max_dups < 0:
            raise ValueError("max_dups must be non-negative")
        for name in ("dup_prob", "batch_prob"):
            p = Fraction(getattr(self, name))
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
            object.__setattr__(self, name, p)


ChannelKind = Union[LocalOrdered, NetworkAdversarial]


@dataclass(frozen=True)
class Schedule:
    """Delivery plan of one message: ``deliveries`` holds (deliver_at_tick, copy_index)."""

    seq: int
    enqueue_tick: int
    deliveries: Tuple[Tuple[int, int], ...]


def plan_message(kind: NetworkAdversarial, seq: int, now: int, batch_with: Optional[int] = None) -> Schedule:
    # draw order: batching, duplication, copy count, then one delay per copy
    rng = SplitMix64(derive_seed(kind.seed, seq))
    batched = rng.chance(kind.batch_prob)
    extra = 0
    if kind.max_dups > 0 and rng.chance(kind.dup_prob):
        extra = 1 + rng.below(kind.max_dups)
    deliveries = []
    for copy in range(1 + extra):
        tick = now + 1 + rng.below(kind.max_delay_ticks)
        if copy == 0 and batched and batch_with is not None and now < batch_with <= now + kind.max_delay_ticks:
            tick = batch_with
        deliveries.append((tick, copy))
    return Schedule(seq, now, tuple(deliveries))


@dataclass
class SimChannel:
    name: str
    kind: ChannelKind = field(default_factory=LocalOrdered)
    schedules: List[Schedule] = field(default_factory=list)

    def __post_init__(self):
        self._seq = 0
        self._inflight: List[Tuple[int, int, int, Any]] = []  # (tick, seq, copy, msg)
        self._last_tick: Optional[int] = None

    def enqueue(self, msg, now: int) -> Schedule:
        seq = self._seq
        self._seq += 1
        if isinstance(self.kind, LocalOrdered):
            sched = Schedule(seq, now, ((now + 1, 0),))
        else:
            sched = plan_message(self.kind, seq, now, self._last_tick)
            self._last_tick = sched.deliveries[0][0]
        self.schedules.append(sched)
        for tick, copy in sched.deliveries:
            self._inflight.append((tick, seq, copy, msg))
        return sched

    def deliverable(self, now: int) -> list:
        ready = [m for m in self._inflight if m[0] <= now]
        if not ready:
            return []
        self._inflight = [m for m in self._inflight if m[0] > now]
        ready.sort(key=lambda m: (m[0], m[1], m[2]))
        if isinstance(self.kind, NetworkAdversarial):
            SplitMix64(derive_seed(self.kind.seed, "release", now)).shuffle(ready)
        return [m[3] for m in ready]

    def pending(self) -> int:
        return len(self._inflight)


# -- exhaustive small schedules (oracle support) ----------------------------

class BoundsExceeded(ValueError):
    pass


SMALL_MAX_MESSAGES = 5


def enumerate_small_schedules(n: int, max_dups: int = 0) -> List[Tuple[int, ...]]:
    """Every distinct delivery sequence of ``n`` messages, each delivered 1..1+max_dups times.

    A sequence lists message indices in delivery order; copies of one message
    are indistinguishable, so each multiset arrangement appears once.
    """
    if not 0 <= n <= SMALL_MAX_MESSAGES or not 0 <= max_dups <= 1:
        raise BoundsExceeded(f"n={n}, max_dups={max_dups} outside n<=5, max_dups<=1")
    out: List[Tuple[int, ...]] = []
    for counts in itertools.product(range(1, max_dups + 2), repeat=n):
        out.extend(_arrangements(list(counts)))
    return out


def _arrangements(counts: List[int]):
    total = sum(counts)
    seq: List[int] = []

    def rec():
        if len(seq) == total:
            yield tuple(seq)
            return
        for i, c in enumerate(counts):
            if c:
                counts[i] -= 1
                seq.append(i)
                yield from rec()
                seq.pop()
                counts[i] += 1

    yield from rec()


def small_schedule_count(n: int, max_dups: int = 0) -> int:
    """Closed form: sum over copy-count vectors c of (sum c)! / prod(c_i!)."""
    return sum(
        factorial(sum(c)) // prod(factorial(x) for x in c)
        for c in itertools.product(range(1, max_dups + 2), repeat=n)
    )
