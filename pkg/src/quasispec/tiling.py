"""Recursive tiling rules over the two-letter alphabet {A, B}.

A rule defines a sequence of label words ``M_1, M_2, ...`` in which every
level after the first is the previous level followed by copies of earlier
levels.  Words are expanded lazily and memoised, and the length/count
queries never materialise the word.

Material profiles are piecewise-constant wave-speed functions with unit cells.
The contrast ``r`` is a wavenumber multiplier on B cells, so A cells carry
speed 1 and B cells speed ``1 / r``.
"""

from __future__ import annotations

import csv
import io
import json
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Custom",
    "DEFAULT_LENGTH_CAP",
    "Fibonacci",
    "LabelSequence",
    "LengthCapExceeded",
    "MaterialProfile",
    "Periodic",
    "RuleError",
    "expand",
    "label_counts",
    "level_length",
    "parse_rule",
    "profile_from_labels",
    "reflected_profile",
]

DEFAULT_LENGTH_CAP = 10_000_000


class LengthCapExceeded(ValueError):
    """Requested expansion is longer than the configured cap."""


class RuleError(ValueError):
    """Malformed tiling rule."""


class LabelSequence(str):
    """Nonempty string over ``{'A', 'B'}``.

    Being a ``str`` subclass it compares equal to plain strings, so
    ``expand(Fibonacci(), 4) == "ABAAB"``.
    """

    def __new__(cls, labels: str = "A"):
        s = str(labels).strip().upper()
        if not s:
            raise RuleError("label sequence must be nonempty")
        bad = set(s) - {"A", "B"}
        if bad:
            raise RuleError(f"labels must be A or B, got {sorted(bad)}")
        return super().__new__(cls, s)

    def counts(self) -> tuple[int, int]:
        return self.count("A"), self.count("B")


# ---------------------------------------------------------------- rules
#
# Every rule answers two questions: the explicit word of each base level, and
# for every other level the tuple of earlier levels whose concatenation forms
# it.  Expansion, lengths, counts and transfer-matrix products all recurse
# over that decomposition.


@dataclass(frozen=True)
class Fibonacci:
    """``F_1 = A``, ``F_2 = AB``, ``F_N = F_{N-1} F_{N-2}``."""

    name = "fibonacci"

    def base(self, level: int) -> LabelSequence | None:
        if level == 1:
            return LabelSequence("A")
        if level == 2:
            return LabelSequence("AB")
        return None

    def parts(self, level: int) -> tuple[int, ...]:
        return (level - 1, level - 2)


@dataclass(frozen=True)
class Periodic:
    """``P_1 = seed``, ``P_{N+1} = P_N P_1``."""

    seed: LabelSequence

    name = "periodic"

    def __post_init__(self):
        object.__setattr__(self, "seed", LabelSequence(self.seed))

    def base(self, level: int) -> LabelSequence | None:
        return self.seed if level == 1 else None

    def parts(self, level: int) -> tuple[int, ...]:
        return (level - 1, 1)


@dataclass(frozen=True)
class Custom:
    """User-defined rule ``M_N = M_{N-1} M_{j_1} M_{j_2} ...``.

    Parameters
    ----------
    m1 : str
        Word of the first level.
    suffix_plan : mapping or sequence
        Suffix level lists.  A mapping is keyed by level ``N >= 2``; a plain
        sequence gives the entries for levels 2, 3, ... in order.  Positive
        entries are absolute level numbers and must be ``< N``; negative
        entries are relative (``-1`` is ``N - 1``, ``-2`` is ``N - 2``).
        Levels past the last planned one reuse the last entry, which is only
        meaningful for relative entries.
    """

    m1: LabelSequence
    suffix_plan: tuple = field(default=((-1,),))

    name = "custom"

    def __post_init__(self):
        object.__setattr__(self, "m1", LabelSequence(self.m1))
        plan = self.suffix_plan
        if isinstance(plan, Mapping):
            items = sorted((int(k), tuple(int(j) for j in v)) for k, v in plan.items())
        else:
            items = [(i + 2, tuple(int(j) for j in v)) for i, v in enumerate(plan)]
        if not items:
            raise RuleError("suffix_plan must have at least one entry")
        levels = [k for k, _ in items]
        if levels[0] != 2 or levels != list(range(2, 2 + len(levels))):
            raise RuleError("suffix_plan must cover consecutive levels starting at 2")
        for lvl, entry in items:
            self._resolve(lvl, entry)
        object.__setattr__(self, "suffix_plan", tuple(e for _, e in items))

    @staticmethod
    def _resolve(level: int, entry: tuple[int, ...]) -> tuple[int, ...]:
        out = []
        for j in entry:
            k = level + j if j < 0 else j
            if not 1 <= k < level:
                raise RuleError(f"level {level} suffix refers to level {k}, must lie in [1, {level - 1}]")
            out.append(k)
        return tuple(out)

    def base(self, level: int) -> LabelSequence | None:
        return self.m1 if level == 1 else None

    def parts(self, level: int) -> tuple[int, ...]:
        idx = min(level - 2, len(self.suffix_plan) - 1)
        return (level - 1,) + self._resolve(level, self.suffix_plan[idx])

    @classmethod
    def from_json(cls, text: str) -> "Custom":
        doc = json.loads(text)
        return cls(doc["m1"], doc["suffix_plan"])


Rule = Fibonacci | Periodic | Custom


def parse_rule(spec: str) -> Rule:
    """Parse ``fibonacci``, ``periodic:<seed>`` or ``custom:<json file>``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "fibonacci" and not arg:
        return Fibonacci()
    if kind == "periodic" and arg:
        return Periodic(LabelSequence(arg))
    if kind == "custom" and arg:
        with open(arg, encoding="utf-8") as fh:
            return Custom.from_json(fh.read())
    raise RuleError(f"unrecognised rule {spec!r}; use fibonacci, periodic:<AB..> or custom:<file.json>")


def _check_level(level: int) -> None:
    if int(level) != level or level < 1:
        raise ValueError(f"level must be a positive integer, got {level!r}")


@lru_cache(maxsize=None)
def _length_and_counts(rule: Rule, level: int) -> tuple[int, int]:
    # (count_A, count_B) of M_level, by recursion over parts.  Python ints,
    # so no overflow even for deep levels.
    base = rule.base(level)
    if base is not None:
        return base.counts()
    a = b = 0
    for k in rule.parts(level):
        ka, kb = _length_and_counts(rule, k)
        a += ka
        b += kb
    return a, b


def level_length(rule: Rule, level: int) -> int:
    """Number of labels in ``M_level``, computed without expanding."""
    _check_level(level)
    return sum(_length_and_counts(rule, level))


def label_counts(rule: Rule, level: int) -> tuple[int, int]:
    """``(count_A, count_B)`` of ``M_level``."""
    _check_level(level)
    return _length_and_counts(rule, level)


_memo: dict[tuple[Rule, int], LabelSequence] = {}
_memo_lock = threading.Lock()


def expand(rule: Rule, level: int, cap: int = DEFAULT_LENGTH_CAP) -> LabelSequence:
    """Explicit label word of ``M_level``.

    Raises
    ------
    LengthCapExceeded
        If the word would be longer than ``cap`` labels.
    """
    _check_level(level)
    n = level_length(rule, level)
    if n > cap:
        raise LengthCapExceeded(f"level {level} has {n} labels, cap is {cap}")
    return _expand(rule, level)


def _expand(rule: Rule, level: int) -> LabelSequence:
    key = (rule, level)
    with _memo_lock:
        hit = _memo.get(key)
    if hit is not None:
        return hit
    base = rule.base(level)
    if base is not None:
        word = base
    else:
        word = LabelSequence("".join(_expand(rule, k) for k in rule.parts(level)))
    with _memo_lock:
        # Another thread may have got here first; both words are identical.
        return _memo.setdefault(key, word)


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class MaterialProfile:
    """Piecewise-constant wave speed on ``[breakpoints[0], breakpoints[-1]]``.

    ``breakpoints`` holds every interval edge (domain ends included), so
    ``len(breakpoints) == len(speeds) + 1``.
    """

    breakpoints: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        sp = np.asarray(self.speeds, dtype=float)
        if bp.ndim != 1 or sp.ndim != 1 or len(bp) != len(sp) + 1 or len(sp) == 0:
            raise ValueError("need len(breakpoints) == len(speeds) + 1 >= 2")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(sp > 0) or not np.all(np.isfinite(sp)):
            raise ValueError("speeds must be finite and positive")
        bp.setflags(write=False)
        sp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "speeds", sp)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def n_intervals(self) -> int:
        return len(self.speeds)

    def speed_at(self, x) -> np.ndarray:
        """Speed at ``x`` (right-continuous; the right end takes the last cell)."""
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.breakpoints, x, side="right") - 1
        return self.speeds[np.clip(i, 0, self.n_intervals - 1)]

    def is_reflection_symmetric(self, tol: float = 0.0) -> bool:
        a, b = self.domain
        return (
            abs(a + b) <= tol
            and np.allclose(self.breakpoints, -self.breakpoints[::-1], rtol=0, atol=tol)
            and np.allclose(self.speeds, self.speeds[::-1], rtol=0, atol=tol)
        )

    def with_speeds(self, speeds) -> "MaterialProfile":
        return MaterialProfile(self.breakpoints, np.asarray(speeds, dtype=float))

    # -- serialisation

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_left", "x_right", "speed"])
        for lo, hi, s in zip(self.breakpoints[:-1], self.breakpoints[1:], self.speeds):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(s))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MaterialProfile":
        rows = list(csv.DictReader(io.StringIO(text), skipinitialspace=True))
        if not rows:
            raise ValueError("profile CSV has no rows")
        left = [float(r["x_left"]) for r in rows]
        right = [float(r["x_right"]) for r in rows]
        if not np.allclose(left[1:], right[:-1], rtol=0, atol=1e-12):
            raise ValueError("profile CSV intervals are not contiguous")
        return cls(np.array(left + [right[-1]]), np.array([float(r["speed"]) for r in rows]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain": list(self.domain),
                "breakpoints": [float(v) for v in self.breakpoints],
                "speeds": [float(v) for v in self.speeds],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MaterialProfile":
        doc = json.loads(text)
        a, b = (float(v) for v in doc["domain"])
        bp = [float(v) for v in doc["breakpoints"]]
        speeds = np.asarray(doc["speeds"], dtype=float)
        # Accept either all edges or interior breakpoints only.
        if len(bp) == len(speeds) - 1:
            bp = [a] + bp + [b]
        if len(bp) != len(speeds) + 1 or bp[0] != a or bp[-1] != b:
            raise ValueError("breakpoints do not match domain/speeds")
        return cls(np.array(bp), speeds)


def _label_speeds(labels: Sequence[str], contrast_r: float) -> np.ndarray:
    if not contrast_r > 0:
        raise ValueError(f"contrast_r must be positive, got {contrast_r!r}")
    inv = 1.0 / contrast_r
    return np.array([1.0 if lab == "A" else inv for lab in labels])


def profile_from_labels(labels: str, contrast_r: float, reflect: bool = True) -> MaterialProfile:
    """Unit-cell profile of a label word, optionally mirrored about ``x = 0``.

    Unreflected profiles occupy ``[0, n]``.  Reflected ones occupy ``[-n, n]``
    with the first label on ``[0, 1)`` and its mirror on ``[-1, 0)``.
    """
    labels = LabelSequence(labels)
    right = _label_speeds(labels, contrast_r)
    n = len(right)
    if not reflect:
        return MaterialProfile(np.arange(n + 1, dtype=float), right)
    return MaterialProfile(np.arange(-n, n + 1, dtype=float), np.concatenate([right[::-1], right]))


def reflected_profile(rule: Rule, level: int, contrast_r: float, n_cells: int | None = None) -> MaterialProfile:
    """Reflected material built from ``M_level``.

    Parameters
    ----------
    rule, level
        Tiling rule and level; the right half is ``M_level``.
    contrast_r : float
        B-cell wavenumber multiplier; B cells get speed ``1 / contrast_r``.
    n_cells : int, optional
        Truncate each half to its first ``n_cells`` labels (the level must be
        at least that long).  Useful for periodic media of odd length.
    """
    word = expand(rule, level)
    if n_cells is not None:
        if n_cells < 1 or n_cells > len(word):
            raise ValueError(f"n_cells={n_cells} outside [1, {len(word)}]")
        word = LabelSequence(word[:n_cells])
    return profile_from_labels(word, contrast_r, reflect=True)
