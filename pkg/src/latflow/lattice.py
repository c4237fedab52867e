"""Bounded join-semilattices for session data.

Two isomorphic encodings of a fixed-length session are provided:

* :class:`BoundedPrefix` holds a prefix of the session plus its total length.
  Merging keeps the longer prefix; the point is top once the prefix is full.
* :class:`SealedSetIndexed` holds position-indexed items plus an optional
  seal (the session length).  Merging is set union, so it tolerates any
  reordering, batching or duplication of deliveries.

:class:`KeyedLattice` lifts either of them pointwise over a map of group keys
and is the state kept by a lattice-flavoured ``group_by``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping, Optional, Tuple, Union


class LatticeError(Exception):
    """Base class for merge failures.  ``key`` is set when raised inside a keyed merge."""

    def __init__(self, message: str, key: Any = None):
        super().__init__(message)
        self.key = key


class IncomparableLattices(LatticeError):
    """Two bounded prefixes do not belong to the same session."""


class ConflictingEntry(LatticeError):
    """One position carries two different values."""


class ConflictingSeal(LatticeError):
    """Two different seals, or an entry lying beyond the seal."""


class LatticeKindMismatch(LatticeError):
    """Points of different lattice kinds were merged."""


@dataclass(frozen=True)
class BoundedPrefix:
    prefix: Tuple[Any, ...] = ()
    declared_len: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.prefix, tuple):
            object.__setattr__(self, "prefix", tuple(self.prefix))
        if self.declared_len is not None:
            if self.declared_len < 0:
                raise ValueError("declared_len must be non-negative")
            if len(self.prefix) > self.declared_len:
                raise ValueError(
                    f"prefix of length {len(self.prefix)} exceeds declared_len {self.declared_len}"
                )

    def __len__(self) -> int:
        return len(self.prefix)


@dataclass(frozen=True)
class SealedSetIndexed:
    """Position-indexed items.  ``entries`` is kept as a position-sorted tuple of pairs."""

    entries: Tuple[Tuple[int, Any], ...] = ()
    seal: Optional[int] = None

    def __post_init__(self):
        items = self.entries.items() if isinstance(self.entries, Mapping) else self.entries
        normalized = tuple(sorted(((int(p), v) for p, v in items), key=lambda pv: pv[0]))
        for i, (pos, _) in enumerate(normalized):
            if pos < 0:
                raise ValueError(f"negative position {pos}")
            if i and normalized[i - 1][0] == pos:
                raise ValueError(f"position {pos} given twice")
        if self.seal is not None:
            if self.seal < 0:
                raise ValueError("seal must be non-negative")
            if normalized and normalized[-1][0] >= self.seal:
                raise ValueError(f"position {normalized[-1][0]} beyond seal {self.seal}")
        object.__setattr__(self, "entries", normalized)

    @classmethod
    def of(cls, entries: Mapping[int, Any] | Iterable[Tuple[int, Any]] = (), seal: Optional[int] = None):
        return cls(tuple(dict(entries).items()), seal)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def values(self) -> Tuple[Any, ...]:
        return tuple(v for _, v in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


Point = Union[BoundedPrefix, SealedSetIndexed]


@dataclass(frozen=True, eq=True)
class KeyedLattice:
    groups: Mapping[Hashable, Point] = field(default_factory=dict)

    def __post_init__(self):
        # a key mapped to its bottom is indistinguishable from an absent key
        groups = {k: v for k, v in dict(self.groups).items() if not (is_lattice_point(v) and v == bottom_of(v))}
        object.__setattr__(self, "groups", groups)

    __hash__ = None  # type: ignore[assignment]

    def get(self, key, default=None):
        return self.groups.get(key, default)

    def __len__(self) -> int:
        return len(self.groups)


# -- Bounded Prefix ---------------------------------------------------------

def bp_bottom() -> BoundedPrefix:
    return BoundedPrefix((), None)


def _union_len(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise IncomparableLattices(f"declared lengths differ: {a} vs {b}")


def bp_merge(a: BoundedPrefix, b: BoundedPrefix) -> BoundedPrefix:
    """Return the longer prefix, carrying whatever length knowledge either side has."""
    length = _union_len(a.declared_len, b.declared_len)
    longer, shorter = (a, b) if len(a.prefix) >= len(b.prefix) else (b, a)
    if longer.prefix[: len(shorter.prefix)] != shorter.prefix:
        raise IncomparableLattices(f"prefixes diverge: {a.prefix!r} vs {b.prefix!r}")
    if length is not None and len(longer.prefix) > length:
        raise IncomparableLattices(
            f"prefix of length {len(longer.prefix)} cannot belong to a session of length {length}"
        )
    if longer.declared_len == length:
        return longer
    return BoundedPrefix(longer.prefix, length)


def bp_is_top(a: BoundedPrefix) -> bool:
    return a.declared_len is not None and len(a.prefix) == a.declared_len


def bp_leq(a: BoundedPrefix, b: BoundedPrefix) -> bool:
    if a.declared_len is not None and a.declared_len != b.declared_len:
        return False
    return b.prefix[: len(a.prefix)] == a.prefix and len(a.prefix) <= len(b.prefix)


# -- Sealed Set of Indexed Values -------------------------------------------

def ssiv_bottom() -> SealedSetIndexed:
    return SealedSetIndexed((), None)


def ssiv_merge(a: SealedSetIndexed, b: SealedSetIndexed) -> SealedSetIndexed:
    if a.seal is not None and b.seal is not None and a.seal != b.seal:
        raise ConflictingSeal(f"seals differ: {a.seal} vs {b.seal}")
    seal = a.seal if a.seal is not None else b.seal
    merged = dict(a.entries)
    for pos, val in b.entries:
        if pos in merged:
            if merged[pos] != val:
                raise ConflictingEntry(f"position {pos}: {merged[pos]!r} vs {val!r}")
        else:
            merged[pos] = val
    if seal is not None and merged and max(merged) >= seal:
        raise ConflictingSeal(f"position {max(merged)} beyond seal {seal}")
    if len(merged) == len(a.entries) and seal == a.seal:
        return a
    if len(merged) == len(b.entries) and seal == b.seal:
        return b
    return SealedSetIndexed(tuple(merged.items()), seal)


def ssiv_is_top(a: SealedSetIndexed) -> bool:
    # positions are unique and < seal, so the count test means 0..seal-1 are all present
    return a.seal is not None and len(a.entries) == a.seal


def ssiv_leq(a: SealedSetIndexed, b: SealedSetIndexed) -> bool:
    if a.seal is not None and a.seal != b.seal:
        return False
    bd = dict(b.entries)
    return all(pos in bd and bd[pos] == val for pos, val in a.entries)


# -- isomorphism ------------------------------------------------------------

def bp_to_ssiv(a: BoundedPrefix) -> SealedSetIndexed:
    return SealedSetIndexed(tuple(enumerate(a.prefix)), a.declared_len)


def ssiv_to_bp(a: SealedSetIndexed) -> BoundedPrefix:
    """Longest gap-free prefix starting at position 0, plus the seal."""
    prefix = []
    for expected, (pos, val) in enumerate(a.entries):
        if pos != expected:
            break
        prefix.append(val)
    return BoundedPrefix(tuple(prefix), a.seal)


# -- keyed pointwise lattice ------------------------------------------------

def keyed_merge(a: KeyedLattice, b: KeyedLattice) -> KeyedLattice:
    out = dict(a.groups)
    for key, point in b.groups.items():
        if key not in out:
            out[key] = point
            continue
        try:
            out[key] = merge(out[key], point)
        except LatticeError as err:
            raise type(err)(f"group {key!r}: {err}", key=key) from err
    return KeyedLattice(out)


def keyed_leq(a: KeyedLattice, b: KeyedLattice) -> bool:
    for key, point in a.groups.items():
        other = b.groups.get(key)
        if other is None:
            if point != bottom_of(point):
                return False
        elif not leq(point, other):
            return False
    return True


# -- kind dispatch ----------------------------------------------------------

def merge(a, b):
    if isinstance(a, BoundedPrefix) and isinstance(b, BoundedPrefix):
        return bp_merge(a, b)
    if isinstance(a, SealedSetIndexed) and isinstance(b, SealedSetIndexed):
        return ssiv_merge(a, b)
    if isinstance(a, KeyedLattice) and isinstance(b, KeyedLattice):
        return keyed_merge(a, b)
    raise LatticeKindMismatch(f"cannot merge {type(a).__name__} with {type(b).__name__}")


def leq(a, b) -> bool:
    if isinstance(a, BoundedPrefix) and isinstance(b, BoundedPrefix):
        return bp_leq(a, b)
    if isinstance(a, SealedSetIndexed) and isinstance(b, SealedSetIndexed):
        return ssiv_leq(a, b)
    if isinstance(a, KeyedLattice) and isinstance(b, KeyedLattice):
        return keyed_leq(a, b)
    raise LatticeKindMismatch(f"cannot compare {type(a).__name__} with {type(b).__name__}")


def is_top(a) -> bool:
    if isinstance(a, BoundedPrefix):
        return bp_is_top(a)
    if isinstance(a, SealedSetIndexed):
        return ssiv_is_top(a)
    raise LatticeKindMismatch(f"{type(a).__name__} has no top test")


def bottom_of(a):
    if isinstance(a, BoundedPrefix):
        return bp_bottom()
    if isinstance(a, SealedSetIndexed):
        return ssiv_bottom()
    if isinstance(a, KeyedLattice):
        return KeyedLattice({})
    raise LatticeKindMismatch(f"{type(a).__name__} is not a lattice point")


def is_lattice_point(value) -> bool:
    return isinstance(value, (BoundedPrefix, SealedSetIndexed, KeyedLattice))
