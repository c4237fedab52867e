"""Canonical text encoding of records and lattice points.

The same encoding is used for trace payloads, golden files, and the bytes that
cross a simulated network channel::

    -4   "apple"   ("apple",2)   (1,)   none   true
    bp(("apple",2),("apple",2)|len=3)      bp(|len=?)
    ssiv{0:"a",2:"c"|seal=3}               ssiv{|seal=?}
    keyed{(1,"Basic")=>ssiv{0:"a"|seal=1}}

Lists are encoded as tuples; decoding always yields tuples.
"""

from __future__ import annotations

import json
from functools import lru_cache
from json.decoder import scanstring

from .lattice import BoundedPrefix, KeyedLattice, SealedSetIndexed


class DecodeError(ValueError):
    pass


@lru_cache(maxsize=65536)
def _encode_str(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def encode(value) -> str:
    t = type(value)
    if t is str:
        return _encode_str(value)
    if t is tuple or t is list:
        if len(value) == 1:
            return f"({encode(value[0])},)"
        return "(" + ",".join(encode(v) for v in value) + ")"
    if value is None:
        return "none"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return _encode_str(str(value))
    if isinstance(value, (BoundedPrefix, SealedSetIndexed)):
        # points are immutable, so the encoding is computed once per instance
        cached = value.__dict__.get("_encoding")
        if cached is None:
            cached = _encode_point(value)
            object.__setattr__(value, "_encoding", cached)
        return cached
    if isinstance(value, KeyedLattice):
        pairs = sorted((encode(k), encode(v)) for k, v in value.groups.items())
        return "keyed{" + ",".join(f"{k}=>{v}" for k, v in pairs) + "}"
    if isinstance(value, (tuple, list)):
        return encode(tuple(value))
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


def _encode_point(value) -> str:
    if isinstance(value, BoundedPrefix):
        items = ",".join(encode(v) for v in value.prefix)
        n = "?" if value.declared_len is None else str(value.declared_len)
        return f"bp({items}|len={n})"
    items = ",".join(f"{p}:{encode(v)}" for p, v in value.entries)
    n = "?" if value.seal is None else str(value.seal)
    return f"ssiv{{{items}|seal={n}}}"


def encode_bytes(value) -> bytes:
    return encode(value).encode("utf-8")


@lru_cache(maxsize=65536)
def decode_bytes(data: bytes):
    return decode(data.decode("utf-8"))


def decode(text: str):
    value, end = _Reader(text).value(0)
    if end != len(text):
        raise DecodeError(f"trailing data at offset {end}: {text[end:end + 20]!r}")
    return value


class _Reader:
    def __init__(self, text: str):
        self.text = text

    def expect(self, i: int, token: str) -> int:
        if not self.text.startswith(token, i):
            raise DecodeError(f"expected {token!r} at offset {i}")
        return i + len(token)

    def integer(self, i: int):
        j = i + 1 if self.text.startswith("-", i) else i
        k = j
        while k < len(self.text) and self.text[k].isdigit():
            k += 1
        if k == j:
            raise DecodeError(f"expected integer at offset {i}")
        return int(self.text[i:k]), k

    def optional_int(self, i: int):
        if self.text.startswith("?", i):
            return None, i + 1
        return self.integer(i)

    def value(self, i: int):
        t = self.text
        if i >= len(t):
            raise DecodeError("unexpected end of input")
        c = t[i]
        if c == '"':
            return scanstring(t, i + 1)
        if c == "-" or c.isdigit():
            return self.integer(i)
        if c == "(":
            return self.sequence(i + 1, ")")
        for word, val in (("none", None), ("true", True), ("false", False)):
            if t.startswith(word, i):
                return val, i + len(word)
        if t.startswith("bp(", i):
            items, i = self.items(i + 3, "|")
            n, i = self.optional_int(self.expect(i, "|len="))
            return BoundedPrefix(tuple(items), n), self.expect(i, ")")
        if t.startswith("ssiv{", i):
            i += 5
            entries = []
            while not t.startswith("|", i):
                pos, i = self.integer(i)
                val, i = self.value(self.expect(i, ":"))
                entries.append((pos, val))
                if t.startswith(",", i):
                    i += 1
            n, i = self.optional_int(self.expect(i, "|seal="))
            return SealedSetIndexed(tuple(entries), n), self.expect(i, "}")
        if t.startswith("keyed{", i):
            i += 6
            groups = {}
            while not t.startswith("}", i):
                k, i = self.value(i)
                v, i = self.value(self.expect(i, "=>"))
                groups[k] = v
                if t.startswith(",", i):
                    i += 1
            return KeyedLattice(groups), i + 1
        raise DecodeError(f"unexpected {c!r} at offset {i}")

    def items(self, i: int, close: str):
        out = []
        while not self.text.startswith(close, i):
            v, i = self.value(i)
            out.append(v)
            if self.text.startswith(",", i):
                i += 1
            elif not self.text.startswith(close, i):
                raise DecodeError(f"expected ',' or {close!r} at offset {i}")
        return out, i

    def sequence(self, i: int, close: str):
        out, i = self.items(i, close)
        return tuple(out), i + 1
