"""Shopping-cart scenarios: the client table, per-client sessions, and the
streams a program's sources draw from."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Tuple

import yaml

from .lattice import BoundedPrefix, SealedSetIndexed

CLASSES = ("Basic", "Prime")
WORDS = ("apple", "banana", "cherry", "date", "eggplant", "fig", "grape", "honeydew")

# stream name -> encoding of the request sessions
DEFAULT_BINDINGS = (
    ("shopping", "raw"),
    ("shopping_bp", "bp"),
    ("shopping_ssiv", "ssiv"),
    ("client_class", "table"),
)


class LineItem(NamedTuple):
    item: str
    qty: int


@dataclass(frozen=True)
class Session:
    client: int
    cls: str
    requests: Tuple[LineItem, ...] = ()

    @property
    def declared_len(self) -> int:
        return len(self.requests)


@dataclass(frozen=True)
class Scenario:
    name: str
    sessions: Tuple[Session, ...]
    bindings: Tuple[Tuple[str, str], ...] = field(default=DEFAULT_BINDINGS)

    def __post_init__(self):
        ids = [s.client for s in self.sessions]
        if len(set(ids)) != len(ids):
            raise ValueError("each client must appear once (client -> class must hold)")

    @property
    def client_class(self) -> Tuple[Tuple[int, str], ...]:
        return tuple((s.client, s.cls) for s in self.sessions)

    def _interleaved(self):
        """(session, position) pairs, round-robin across clients in table order."""
        depth = max((s.declared_len for s in self.sessions), default=0)
        for i in range(depth):
            for s in self.sessions:
                if i < s.declared_len:
                    yield s, i

    def stream(self, encoding: str) -> Tuple:
        if encoding == "table":
            return self.client_class
        if encoding == "raw":
            return tuple((s.client, tuple(s.requests[i])) for s, i in self._interleaved())
        # an empty session still announces its (zero) length in the lattice encodings
        empty = [s.client for s in self.sessions if not s.declared_len]
        if encoding == "bp":
            return tuple((c, BoundedPrefix((), 0)) for c in empty) + tuple(
                (s.client, BoundedPrefix(tuple(tuple(r) for r in s.requests[: i + 1]), s.declared_len))
                for s, i in self._interleaved()
            )
        if encoding == "ssiv":
            return tuple((c, SealedSetIndexed((), 0)) for c in empty) + tuple(
                (s.client, SealedSetIndexed(((i, tuple(s.requests[i])),),
                                            s.declared_len if i == s.declared_len - 1 else None))
                for s, i in self._interleaved()
            )
        raise ValueError(f"unknown stream encoding {encoding!r}")

    def streams(self) -> Dict[str, Tuple]:
        return {name: self.stream(enc) for name, enc in self.bindings}


def sequential_fold_oracle(scenario: Scenario) -> Dict[Tuple[int, str], Tuple]:
    """What a single sequential pass over each session yields: the ordered request list."""
    return {(s.client, s.cls): tuple(tuple(r) for r in s.requests) for s in scenario.sessions}


def apples() -> Scenario:
    return Scenario("apples", (Session(1, "Basic", (LineItem("apple", 2), LineItem("apple", 2), LineItem("apple", -4))),))


def generate_scenario(seed: int, n_clients: int, max_session_len: int) -> Scenario:
    """Seeded scenario; session lengths are drawn from [1, max_session_len]."""
    if n_clients < 1 or max_session_len < 0:
        raise ValueError("need n_clients >= 1 and max_session_len >= 0")
    rng = random.Random(seed)
    quantities = [q for q in range(-5, 6) if q != 0]
    sessions = []
    for i in range(n_clients):
        length = rng.randint(1, max_session_len) if max_session_len else 0
        reqs = tuple(LineItem(rng.choice(WORDS), rng.choice(quantities)) for _ in range(length))
        sessions.append(Session(i + 1, CLASSES[i % len(CLASSES)], reqs))
    return Scenario(f"gen-{seed}-{n_clients}-{max_session_len}", tuple(sessions))


BUILTIN = {"apples": apples}


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "clients": [
            {"id": s.client, "class": s.cls, "session": [[r.item, r.qty] for r in s.requests]}
            for s in sc.sessions
        ],
        "bindings": dict(sc.bindings),
    }


def scenario_from_dict(doc: dict) -> Scenario:
    sessions = tuple(
        Session(int(c["id"]), str(c["class"]), tuple(LineItem(str(i), int(q)) for i, q in c.get("session") or []))
        for c in doc.get("clients") or []
    )
    bindings = tuple((doc.get("bindings") or dict(DEFAULT_BINDINGS)).items())
    return Scenario(doc.get("name", "scenario"), sessions, bindings)


def load_scenario(spec: str) -> Scenario:
    """A builtin name (``apples``), ``gen:SEED:CLIENTS:MAXLEN``, or a YAML file path."""
    if spec in BUILTIN:
        return BUILTIN[spec]()
    if spec.startswith("gen:"):
        seed, n, m = (int(x) for x in spec[4:].split(":"))
        return generate_scenario(seed, n, m)
    return scenario_from_dict(yaml.safe_load(Path(spec).read_text()))


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)
