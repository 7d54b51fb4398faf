"""Transition law of the (L,1)-reflecting walk on {0, 1, 2, ...}.

From a state i >= 1 the walk steps to i+1 with probability p(i) or jumps
down by j in 1..L with probability q_j(i). Jumps that would land below 0
are folded onto 0. State 0 always moves to 1.

The law is given by explicit rows for states 1..K and one constant tail
row shared by every state above K.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from lrw.errors import (
    BadDimension,
    DegenerateRow,
    NegativeProbability,
    RowSumMismatch,
    ZeroUpProbability,
)

SUM_TOL = 1e-12


@dataclass(frozen=True)
class ProbRow:
    """One row of the law: up-probability ``p`` and down-probabilities ``q``.

    ``q[j-1]`` is the probability of a jump of size ``j``.
    """

    p: float
    q: tuple[float, ...]

    @property
    def L(self) -> int:
        return len(self.q)

    @property
    def drift(self) -> float:
        """Mean downward displacement minus upward: sum_j j*q_j - p."""
        return math.fsum((j + 1) * qj for j, qj in enumerate(self.q)) - self.p

    def to_dict(self) -> dict:
        return {"p": self.p, "q": list(self.q)}


@dataclass(frozen=True)
class WalkSpec:
    """Raw, unvalidated description of a walk."""

    L: int
    rows: Sequence[ProbRow]
    tail: ProbRow

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "WalkSpec":
        try:
            L = doc["L"]
            tail = _row_from_doc(doc["tail"])
            rows = [_row_from_doc(r) for r in doc.get("rows", [])]
        except (KeyError, TypeError) as exc:
            raise BadDimension(f"malformed model document: {exc!r}") from None
        return cls(L=L, rows=rows, tail=tail)


def _row_from_doc(doc: Mapping[str, Any]) -> ProbRow:
    q = doc["q"]
    if isinstance(q, (int, float)):
        q = [q]
    return ProbRow(p=float(doc["p"]), q=tuple(float(x) for x in q))


@dataclass(frozen=True)
class ValidatedModel:
    """An immutable, normalized transition law.

    Use :func:`validate` to build one. ``rows[k]`` holds state ``k+1``;
    every state above ``cutoff`` uses ``tail``.
    """

    L: int
    rows: tuple[ProbRow, ...]
    tail: ProbRow

    @property
    def cutoff(self) -> int:
        return len(self.rows)

    @property
    def state_independent(self) -> bool:
        return self.cutoff == 0

    def row(self, i: int) -> ProbRow:
        """Law of state ``i >= 1``."""
        if i < 1:
            raise ValueError(f"state {i} has no ProbRow (state 0 reflects)")
        if i <= self.cutoff:
            return self.rows[i - 1]
        return self.tail

    def up(self, i: int) -> float:
        return 1.0 if i == 0 else self.row(i).p

    def folded_q(self, i: int) -> tuple[float, ...]:
        """Down-probabilities of state ``i`` with overshoot folded onto 0.

        Entry ``j-1`` is the probability of landing at ``i-j``; for
        ``i < L`` all mass of jumps of size >= i sits in entry ``i-1``.
        """
        q = self.row(i).q
        if i >= self.L:
            return q
        head = list(q[: i - 1])
        head.append(math.fsum(q[i - 1 :]))
        head.extend([0.0] * (self.L - i))
        return tuple(head)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "rows": [r.to_dict() for r in self.rows],
            "tail": self.tail.to_dict(),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class TransitionRow:
    state: int
    entries: tuple[tuple[int, float], ...]

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)


def _check_row(row: ProbRow, L: int, where: str) -> ProbRow:
    if len(row.q) != L:
        raise BadDimension(f"{where}: expected {L} down-probabilities, got {len(row.q)}")
    values = (row.p, *row.q)
    if any(not math.isfinite(v) for v in values):
        raise NegativeProbability(f"{where}: non-finite probability")
    if any(v < 0 for v in values):
        raise NegativeProbability(f"{where}: negative probability in {values}")
    if row.p == 0:
        raise ZeroUpProbability(f"{where}: p must be > 0")
    total = math.fsum(values)
    if abs(total - 1.0) >= SUM_TOL:
        raise RowSumMismatch(f"{where}: probabilities sum to {total!r}")
    if total != 1.0:
        row = ProbRow(p=row.p / total, q=tuple(v / total for v in row.q))
    if row.p >= 1.0:
        raise DegenerateRow(f"{where}: p = 1 leaves no downward mass")
    return row


def validate(spec: WalkSpec | Mapping[str, Any]) -> ValidatedModel:
    """Check a walk description and return a normalized model.

    Rows whose sum is within 1e-12 of one are rescaled; larger deviations
    raise :class:`RowSumMismatch`. Trailing explicit rows identical to the
    tail are dropped, so equivalent inputs normalize to the same model.
    """
    if not isinstance(spec, WalkSpec):
        spec = WalkSpec.from_dict(spec)
    L = spec.L
    if not isinstance(L, int) or isinstance(L, bool) or L < 1:
        raise BadDimension(f"L must be a positive integer, got {L!r}")
    tail = _check_row(spec.tail, L, "tail")
    rows = [_check_row(r, L, f"state {k + 1}") for k, r in enumerate(spec.rows)]
    while rows and rows[-1] == tail:
        rows.pop()
    return ValidatedModel(L=L, rows=tuple(rows), tail=tail)


def load_model(path: str | Path) -> ValidatedModel:
    with open(path, encoding="utf-8") as fh:
        return validate(json.load(fh))


def shipped_models() -> dict[str, Path]:
    """Example model files bundled with the package, keyed by stem."""
    root = Path(str(resources.files("lrw") / "data"))
    return {f.stem: f for f in sorted(root.glob("*.json"))}


def shipped_models() -> dict[str, Path]:
    """Example model files bundled with the package, keyed by stem."""
    root = Path(str(resources.files("lrw") / "data"))
    return {f.stem: f for f in sorted(root.glob("*.json"))}


def state_independent(p: float, q: Sequence[float]) -> ValidatedModel:
    """Model whose every state i >= 1 uses the same row."""
    return validate(WalkSpec(L=len(q), rows=(), tail=ProbRow(p, tuple(q))))


def transition_row(model: ValidatedModel, i: int) -> TransitionRow:
    """Outgoing transitions of state ``i`` with boundary folding applied."""
    if i < 0:
        raise ValueError("states are nonnegative")
    if i == 0:
        return TransitionRow(0, ((1, 1.0),))
    row = model.row(i)
    entries = [(i + 1, row.p)]
    for j, qj in enumerate(model.folded_q(i), start=1):
        if j <= i and qj > 0:
            entries.append((i - j, qj))
    return TransitionRow(i, tuple(entries))
