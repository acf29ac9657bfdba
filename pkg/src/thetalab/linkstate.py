"""Link-pattern state spaces of the dilute loop-model transfer matrix.

A connectivity state of L edge points on a periodic row assigns every point
one of: Empty, Leg (a through-line descending the full lattice), or an arc
end paired with another point.  Arcs are pairwise non-crossing on the
annulus and never enclose a leg.

Encoding: one symbol per site, EMPTY/LEG/OPEN/CLOSE, packed 4 bits per site
into a single integer (site i occupies bits 4i..4i+3).  Arcs are recovered
by bracket matching, performed cyclically: an OPEN at i pairing a CLOSE at
j > i caps the short side (i, j); a CLOSE appearing before its OPEN marks an
arc routed the other way around, across the seam between site L-1 and site
0.  That orientation bit is exactly the arc's seam-crossing parity, which
decides whether a loop closed through it is contractible.

Sector flavours:

- ell = 0, annular=False (default): arcs all parity 0 ("disk-like").  This
  is the full closure of the row action whenever contractible and
  non-contractible loops carry the same weight, and matches the textbook
  connectivity counts.  Dimension = Motzkin(L).
- ell = 0, annular=True: seam-crossing arcs kept as distinct states, needed
  whenever non-contractible loops are weighted differently (untwisted runs,
  twist sweeps).  Dimension = central trinomial coefficient of L.
- ell >= 1: legs present; arcs live inside the gaps between consecutive
  legs (the gap spanning the seam included), so each arc's routing is
  forced and loops can never wind.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "EMPTY",
    "LEG",
    "OPEN",
    "CLOSE",
    "LinkPattern",
    "SectorBasis",
    "PatternError",
    "enumerate_sector",
    "canonical_code",
    "decode",
    "pattern_symbols",
    "match_pairs",
    "is_valid_pattern",
    "count_sector",
    "count_strip",
    "dimension_table",
]

EMPTY, LEG, OPEN, CLOSE = 0, 1, 2, 3

_MAX_SITES = 15  # 4 bits/site in a 64-bit code, one nibble spare for transfer sweeps


class PatternError(ValueError):
    """Raised for malformed or inconsistent link patterns."""


def canonical_code(symbols):
    """Pack per-site symbols into the canonical integer code."""
    code = 0
    for i, s in enumerate(symbols):
        s = int(s)
        if not 0 <= s <= 3:
            raise PatternError(f"invalid symbol {s} at site {i}")
        code |= s << (4 * i)
    return code


def pattern_symbols(code, L):
    """Unpack an integer code into a length-L uint8 symbol array."""
    return np.array([(int(code) >> (4 * i)) & 0xF for i in range(L)], dtype=np.uint8)


def match_pairs(symbols):
    """Cyclically match brackets; returns list of (i, j, crosses_seam).

    OPEN at i matched to CLOSE at j>i is a direct arc; leftover CLOSEs
    (before their OPENs) pair across the seam with leftover OPENs, innermost
    first.  Raises PatternError on unbalanced brackets.
    """
    stack = []
    pairs = []
    dangling_close = []
    for i, s in enumerate(symbols):
        if s == OPEN:
            stack.append(i)
        elif s == CLOSE:
            if stack:
                pairs.append((stack.pop(), i, False))
            else:
                dangling_close.append(i)
    if len(stack) != len(dangling_close):
        raise PatternError("unbalanced brackets")
    # last unmatched OPEN pairs the first unmatched CLOSE, nesting through the seam
    for o, c in zip(reversed(stack), dangling_close):
        pairs.append((c, o, True))
    return pairs


def is_valid_pattern(symbols, ell, annular=False):
    """Check every sector invariant for a symbol string.

    Brackets must match (cyclically), the number of legs must equal ell, no
    arc may enclose a leg, and seam-crossing arcs are admitted only in the
    annular ell=0 basis or inside the seam gap for ell >= 1.
    """
    symbols = list(symbols)
    if sum(1 for s in symbols if s == LEG) != ell:
        return False
    try:
        pairs = match_pairs(symbols)
    except PatternError:
        return False
    legs = [i for i, s in enumerate(symbols) if s == LEG]
    for i, j, seam in pairs:
        if seam:
            # capped side runs j..end, start..i
            inside = [k for k in legs if k > j or k < i]
        else:
            inside = [k for k in legs if i < k < j]
        if inside:
            return False
        if seam and ell == 0 and not annular:
            return False
    return True


def _gen_ell0_disk(L):
    out = []
    sym = [0] * L

    def rec(i, depth):
        if i == L:
            if depth == 0:
                out.append(canonical_code(sym))
            return
        if L - i < depth:  # cannot close what is open
            return
        sym[i] = EMPTY
        rec(i + 1, depth)
        sym[i] = OPEN
        rec(i + 1, depth + 1)
        if depth > 0:
            sym[i] = CLOSE
            rec(i + 1, depth - 1)
        sym[i] = 0

    rec(0, 0)
    return out


def _gen_ell0_annular(L):
    # any string with equal OPEN/CLOSE counts matches cyclically and embeds
    out = []
    sym = [0] * L

    def rec(i, balance):
        if i == L:
            if balance == 0:
                out.append(canonical_code(sym))
            return
        if abs(balance) > L - i:
            return
        for s in (EMPTY, OPEN, CLOSE):
            sym[i] = s
            rec(i + 1, balance + (s == OPEN) - (s == CLOSE))
        sym[i] = 0

    rec(0, 0)
    return out


def _gen_legs(L, ell):
    # head (before the first leg) may carry dangling CLOSEs that match
    # dangling OPENs of the tail (after the last leg) through the seam;
    # between legs, gaps are plain balanced words
    out = []
    sym = [0] * L

    def rec(i, legs_left, depth, dangl, seen_leg):
        if i == L:
            if legs_left == 0 and depth == dangl:
                out.append(canonical_code(sym))
            return
        if legs_left > L - i:
            return
        sym[i] = EMPTY
        rec(i + 1, legs_left, depth, dangl, seen_leg)
        if legs_left > 0 and depth == 0:
            sym[i] = LEG
            rec(i + 1, legs_left - 1, 0, dangl, True)
        sym[i] = OPEN
        rec(i + 1, legs_left, depth + 1, dangl, seen_leg)
        if depth > 0:
            sym[i] = CLOSE
            rec(i + 1, legs_left, depth - 1, dangl, seen_leg)
        elif not seen_leg:
            sym[i] = CLOSE  # dangling: will close a tail arc through the seam
            rec(i + 1, legs_left, 0, dangl + 1, seen_leg)
        sym[i] = 0

    rec(0, ell, 0, 0, False)
    return out


@dataclass(frozen=True)
class LinkPattern:
    """A single connectivity: symbol string plus derived arc structure."""

    L: int
    symbols: tuple

    @property
    def code(self):
        return canonical_code(self.symbols)

    @property
    def ell(self):
        return sum(1 for s in self.symbols if s == LEG)

    def arcs(self):
        """(i, j, crosses_seam) triples for every arc."""
        return match_pairs(self.symbols)

    def validate(self, annular=False):
        if len(self.symbols) != self.L:
            raise PatternError("length mismatch")
        if not is_valid_pattern(self.symbols, self.ell, annular=annular):
            raise PatternError(f"invalid pattern {self.symbols}")
        return True


class SectorBasis:
    """Ordered basis of one (L, ell) sector.

    codes are sorted ascending, giving a stable bijection between patterns
    and dense indices 0..dim-1.
    """

    def __init__(self, L, ell, annular=False):
        if L < 1:
            raise ValueError("L must be >= 1")
        if L > _MAX_SITES:
            raise ValueError(f"packed patterns support L <= {_MAX_SITES}")
        if ell < 0:
            raise ValueError("ell must be >= 0")
        self.L = int(L)
        self.ell = int(ell)
        self.annular = bool(annular) and ell == 0
        if ell > L:
            codes = []
        elif ell == 0:
            codes = _gen_ell0_annular(L) if self.annular else _gen_ell0_disk(L)
        else:
            codes = _gen_legs(L, ell)
        codes.sort()
        self.codes = np.array(codes, dtype=np.uint64)
        self._index = {int(c): i for i, c in enumerate(codes)}

    @property
    def dim(self):
        return len(self.codes)

    @property
    def empty(self):
        return self.dim == 0

    def index(self, code):
        try:
            return self._index[int(code)]
        except KeyError:
            raise PatternError(f"code {code} not in sector (L={self.L}, ell={self.ell})")

    def __contains__(self, code):
        return int(code) in self._index

    def pattern(self, i):
        return LinkPattern(self.L, tuple(pattern_symbols(self.codes[i], self.L)))

    def __iter__(self):
        for i in range(self.dim):
            yield self.pattern(i)

    def __repr__(self):
        kind = "annular" if self.annular else "disk" if self.ell == 0 else "legs"
        return f"SectorBasis(L={self.L}, ell={self.ell}, {kind}, dim={self.dim})"


@lru_cache(maxsize=256)
def enumerate_sector(L, ell, annular=False):
    """Build (and cache) the sector basis."""
    return SectorBasis(L, ell, annular=annular)


def decode(basis, i):
    return basis.pattern(i)


@lru_cache(maxsize=4096)
def count_sector(L, ell, annular=False):
    """Sector dimension without materializing patterns."""
    if ell > L:
        return 0
    if ell == 0:
        if annular:
            # strings with equal numbers of OPEN and CLOSE
            from math import comb

            return sum(
                comb(L, 2 * k) * comb(2 * k, k) for k in range(L // 2 + 1)
            )
        return _motzkin(L)
    # choose the first leg in L ways; the rest is a linear word with ell-1
    # legs and per-gap balance; each pattern counted once per leg
    return L * _count_linear(L - 1, ell - 1) // ell


@lru_cache(maxsize=None)
def _motzkin(n):
    if n <= 1:
        return 1
    return ((2 * n + 1) * _motzkin(n - 1) + 3 * (n - 1) * _motzkin(n - 2)) // (n + 2)


@lru_cache(maxsize=None)
def _count_linear(length, legs):
    """Words of given length: `legs` legs, balanced brackets within each gap."""

    @lru_cache(maxsize=None)
    def rec(i, legs_left, depth):
        if depth > length - i or legs_left > length - i:
            return 0
        if i == length:
            return 1 if (legs_left == 0 and depth == 0) else 0
        total = rec(i + 1, legs_left, depth)  # EMPTY
        total += rec(i + 1, legs_left, depth + 1)  # OPEN
        if depth > 0:
            total += rec(i + 1, legs_left, depth - 1)  # CLOSE
        elif legs_left > 0:
            total += rec(i + 1, legs_left - 1, 0)  # LEG
        return total

    return rec(0, legs, 0)


@lru_cache(maxsize=4096)
def count_strip(L, ell):
    """Open-boundary (strip) count: no arc may cross the seam at all."""
    if ell > L:
        return 0
    return _count_linear(L, ell)


def dimension_table(L_max, annular=False):
    """Exact |basis(L, ell)| for 1 <= L <= L_max, 0 <= ell <= L.

    Returns a list of rows [L, d_0, d_1, ..., d_L].
    """
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    table = []
    for L in range(1, L_max + 1):
        table.append([L] + [count_sector(L, ell, annular=annular and ell == 0) for ell in range(L + 1)])
    return table
