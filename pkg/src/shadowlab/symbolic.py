"""Subshifts of finite type: admissibility, primitivity, gluing of sequences.

Points of the shift dynamical system are bi-infinite symbol sequences; the
orbit of a sequence is the family of its shifts.  The weighted symbol metric
sums 2^-|k| over disagreement positions, so two sequences are close when they
agree on a long block around 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import UsageError, Window

#: Wielandt bound on the primitivity exponent of an r-letter system; the
#: search stops here, so non-primitive systems terminate with "none".
def _primitivity_bound(r: int) -> int:
    return (r - 1) ** 2 + 1


@dataclass(frozen=True)
class SymbolSequence:
    """A finite window of a symbol sequence (alphabet indices start at 0)."""

    window: Window
    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if len(self.symbols) != len(self.window):
            raise UsageError("symbol count does not match window")

    def symbol(self, i: int) -> int:
        return self.symbols[self.window.offset(i)]


class PrimitivityResult(NamedTuple):
    exponent: Optional[int]
    reason: str


@dataclass(frozen=True)
class TransitionSystem:
    """A finite alphabet with a binary transition matrix.

    ``exponent`` caches the primitivity exponent: the least M with every
    entry of the M-th boolean matrix power positive, or None when no power
    within the Wielandt bound is positive.
    """

    size: int
    matrix: tuple[tuple[int, ...], ...]
    exponent: Optional[int] = None

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.matrix)
        if len(rows) != self.size or any(len(r) != self.size for r in rows):
            raise UsageError(f"matrix must be {self.size}x{self.size}")
        if any(v not in (0, 1) for row in rows for v in row):
            raise UsageError("matrix entries must be 0 or 1")
        object.__setattr__(self, "matrix", rows)

    @classmethod
    def from_matrix(cls, rows) -> "TransitionSystem":
        rows = tuple(tuple(int(v) for v in row) for row in rows)
        sys = cls(len(rows), rows)
        return cls(len(rows), rows, primitivity(sys).exponent)

    def as_bool(self) -> np.ndarray:
        return np.array(self.matrix, dtype=bool)

    def allows(self, i: int, j: int) -> bool:
        return self.matrix[i][j] == 1


class AdmissibilityResult(NamedTuple):
    admissible: bool
    first_violation: Optional[int]


def is_admissible(system: TransitionSystem, seq: SymbolSequence) -> AdmissibilityResult:
    """Whether every consecutive pair is an allowed transition."""
    for s in seq.symbols:
        if not (0 <= s < system.size):
            raise UsageError(f"symbol {s} outside alphabet of size {system.size}")
    for i, (s, t) in enumerate(zip(seq.symbols, seq.symbols[1:])):
        if not system.allows(s, t):
            return AdmissibilityResult(False, seq.window.lo + i)
    return AdmissibilityResult(True, None)


def primitivity(system: TransitionSystem) -> PrimitivityResult:
    """Least M with the M-th boolean power entrywise positive, if any.

    Boolean (or/and) powers are used throughout: only positivity matters and
    integer powers would overflow long before the Wielandt bound.
    """
    pi = system.as_bool()
    r = system.size
    if r < 1:
        raise UsageError("alphabet must be nonempty")
    if not pi.any(axis=1).all():
        return PrimitivityResult(None, "a row is all zero: some letter has no successor")
    if not pi.any(axis=0).all():
        return PrimitivityResult(None, "a column is all zero: some letter has no predecessor")
    power = pi.copy()
    for m in range(1, _primitivity_bound(r) + 1):
        if power.all():
            return PrimitivityResult(m, "primitive")
        power = power @ pi
    return PrimitivityResult(None, f"no positive power up to the bound {_primitivity_bound(r)}")


def boolean_power(system: TransitionSystem, n: int) -> np.ndarray:
    """Independent n-th boolean power (oracle helper for tests)."""
    pi = system.as_bool()
    out = np.eye(system.size, dtype=bool)
    for _ in range(n):
        out = out @ pi
    return out


def sequence_distance(s: SymbolSequence, u: SymbolSequence) -> float:
    """Sum of 2^-|k| over the window positions where the sequences differ."""
    if s.window != u.window:
        raise UsageError("sequence windows must coincide")
    total = 0.0
    for k, (a, b) in zip(s.window.indices(), zip(s.symbols, u.symbols)):
        if a != b:
            total += 2.0 ** (-abs(k))
    return total


def connecting_word(system: TransitionSystem, start: int, end: int,
                    length: int) -> Optional[tuple[int, ...]]:
    """Lexicographically smallest interior word joining start to end.

    The returned word has ``length - 1`` symbols; start, word, end is then an
    admissible block of exactly ``length`` transitions.  None when no path of
    that exact length exists.
    """
    if length < 1:
        raise UsageError("length must be at least 1")
    r = system.size
    if not (0 <= start < r and 0 <= end < r):
        raise UsageError("start and end must be alphabet letters")
    pi = system.as_bool()
    # reach[t][v]: an admissible path of exactly t steps from v to end exists
    reach = np.zeros((length + 1, r), dtype=bool)
    reach[0][end] = True
    for t in range(1, length + 1):
        reach[t] = pi @ reach[t - 1]
    if not reach[length][start]:
        return None
    word = []
    current = start
    for remaining in range(length - 1, 0, -1):
        for nxt in range(r):
            if system.allows(current, nxt) and reach[remaining][nxt]:
                word.append(nxt)
                current = nxt
                break
        else:  # pragma: no cover - reachability table guarantees a choice
            raise UsageError("path search lost reachability")
    if not system.allows(current, end):  # pragma: no cover
        raise UsageError("path search lost reachability at the final step")
    return tuple(word)


@dataclass(frozen=True)
class GluedSequence:
    """Result of gluing two admissible sequences at time 0.

    The output copies the backward input up to -M and the forward input from
    M on; the interior is a connecting word.  Profiles record the distance of
    the k-th shift of the output from the k-th shift of the matching input,
    each measured on the overlap of the shifted windows.
    """

    z: SymbolSequence
    backward_profile: tuple[tuple[int, float], ...]
    forward_profile: tuple[tuple[int, float], ...]
    exponent: int


def _shifted_distance(z: SymbolSequence, ref: SymbolSequence, shift: int) -> float:
    """Distance of shift^k z from shift^k ref on the overlap window."""
    lo = max(z.window.lo, ref.window.lo) - shift
    hi = min(z.window.hi, ref.window.hi) - shift
    total = 0.0
    for i in range(lo, hi + 1):
        if z.symbol(i + shift) != ref.symbol(i + shift):
            total += 2.0 ** (-abs(i))
    return total


def symbolic_glue(system: TransitionSystem, x: SymbolSequence,
                  y: SymbolSequence) -> GluedSequence:
    """Glue admissible sequences: keep x below -M, y above M, connect between.

    Requires a primitive system (the connecting word of length 2M exists
    because the 2M-th matrix power is positive).
    """
    M = system.exponent
    if M is None:
        raise UsageError("system has no primitivity exponent; sequences cannot be glued")
    ok_x = is_admissible(system, x)
    if not ok_x.admissible:
        raise UsageError(f"backward sequence inadmissible at index {ok_x.first_violation}")
    ok_y = is_admissible(system, y)
    if not ok_y.admissible:
        raise UsageError(f"forward sequence inadmissible at index {ok_y.first_violation}")
    if x.window.hi != 0 or y.window.lo != 0:
        raise UsageError("x must end at 0 and y must start at 0")
    if x.window.lo > -M or y.window.hi < M:
        raise UsageError(f"windows must reach +-M = {M} for the interior word")

    interior = connecting_word(system, x.symbol(-M), y.symbol(M), 2 * M)
    if interior is None:  # pragma: no cover - positivity of pi^(2M) forbids this
        raise UsageError("no connecting word despite primitivity")
    window = Window(x.window.lo, y.window.hi)
    symbols = (x.symbols[:x.window.offset(-M) + 1]
               + interior
               + y.symbols[y.window.offset(M):])
    z = SymbolSequence(window, symbols)
    backward = tuple((k, _shifted_distance(z, x, k)) for k in range(window.lo, 0))
    forward = tuple((k, _shifted_distance(z, y, k)) for k in range(0, window.hi + 1))
    return GluedSequence(z, backward, forward, M)


def truncate_alphabet(system: TransitionSystem, ell: int) -> TransitionSystem:
    """Collapse letters ell-1..r-1 (0-based) into a single aggregate letter.

    The aggregate letter receives the or-fold of the transitions of the
    letters it absorbs.
    """
    r = system.size
    if not (2 <= ell <= r):
        raise UsageError("truncation size must lie in [2, alphabet size]")
    pi = system.as_bool()
    keep = ell - 1
    out = np.zeros((ell, ell), dtype=bool)
    out[:keep, :keep] = pi[:keep, :keep]
    out[:keep, keep] = pi[:keep, keep:].any(axis=1)
    out[keep, :keep] = pi[keep:, :keep].any(axis=0)
    out[keep, keep] = pi[keep:, keep:].any()
    return TransitionSystem.from_matrix(out.astype(int).tolist())


def read_transition_matrix(text: str) -> TransitionSystem:
    """Parse the plain-text matrix format: first line r, then r rows of 0/1."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise UsageError("empty transition matrix file")
    try:
        r = int(lines[0])
    except ValueError as exc:
        raise UsageError(f"first line must be the alphabet size, got {lines[0]!r}") from exc
    if len(lines) != r + 1:
        raise UsageError(f"expected {r} matrix rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != r or any(p not in ("0", "1") for p in parts):
            raise UsageError(f"bad matrix row {ln!r}: need {r} space-separated 0/1 digits")
        rows.append([int(p) for p in parts])
    return TransitionSystem.from_matrix(rows)


def write_transition_matrix(system: TransitionSystem) -> str:
    lines = [str(system.size)]
    lines += [" ".join(str(v) for v in row) for row in system.matrix]
    return "\n".join(lines) + "\n"


def golden_mean_system() -> TransitionSystem:
    """Two letters, the pair (1, 1) forbidden (0-based)."""
    return TransitionSystem.from_matrix([[1, 1], [1, 0]])


def random_admissible(system: TransitionSystem, window: Window, rng) -> SymbolSequence:
    """A uniformly random admissible sequence drawn edge by edge."""
    pi = system.as_bool()
    succ = [np.nonzero(pi[i])[0] for i in range(system.size)]
    pred = [np.nonzero(pi[:, j])[0] for j in range(system.size)]
    if any(len(s) == 0 for s in succ) or any(len(p) == 0 for p in pred):
        raise UsageError("system has a letter with no successor or no predecessor")
    start = int(rng.integers(system.size))
    back = [start]
    for _ in range(-window.lo):
        back.append(int(rng.choice(pred[back[-1]])))
    symbols = back[::-1]
    for _ in range(window.hi):
        symbols.append(int(rng.choice(succ[symbols[-1]])))
    return SymbolSequence(window, tuple(symbols))
