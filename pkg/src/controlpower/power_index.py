"""Weighted voting games and exact Shapley-Shubik power computation.

Games use the strict-majority rule of a shareholders' meeting: a coalition
wins iff its combined weight strictly exceeds half the total weight of all
players in the game. Exactly half loses, so a coalition and its complement
can never both win, and the grand coalition always wins.

All voting decisions are made in exact integer arithmetic. At construction
the given weights are converted to proportions of their own total and
placed on a fixed integer grid (``grid`` units per unit of total weight,
rounded half to even). Pivot counting is pure-integer and power values are
returned as ``fractions.Fraction``, so the three independent algorithms
(permutation enumeration, subset enumeration, generating-function dynamic
program) agree bit for bit wherever their size contracts overlap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

DEFAULT_GRID = 10**6
MAX_PLAYERS = 20
ORACLE_MAX_PLAYERS = 9


@dataclass(frozen=True)
class WeightedVotingGame:
    """Players with non-negative weights under the strict-majority rule.

    ``weights`` are the raw shares as given; ``int_weights`` are the grid
    units actually used for every win/lose decision.
    """

    weights: tuple[float, ...]
    int_weights: tuple[int, ...]
    grid: int = DEFAULT_GRID

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> float:
        """Total raw weight of all players."""
        return math.fsum(self.weights)

    @property
    def quota(self) -> float:
        """Raw-weight threshold; a coalition wins strictly above it."""
        return self.total / 2.0

    @property
    def int_total(self) -> int:
        return sum(self.int_weights)


@dataclass(frozen=True)
class PowerProfile:
    """Per-player power values, exact rationals summing to exactly 1."""

    exact: tuple[Fraction, ...]

    @property
    def spi(self) -> tuple[float, ...]:
        """Float view of the exact values (error only at this boundary)."""
        return tuple(float(v) for v in self.exact)

    def __len__(self) -> int:
        return len(self.exact)

    def __getitem__(self, i: int) -> Fraction:
        return self.exact[i]


class CoalitionCount:
    """Subset counts indexed by (coalition size, accumulated grid weight).

    Built once for all players; per-player counts are recovered by dividing
    out that player's generating factor, which avoids n separate passes.
    """

    def __init__(self, table: dict[tuple[int, int], int]):
        self.table = table

    @classmethod
    def build(cls, weights: Sequence[int]) -> "CoalitionCount":
        table = {(0, 0): 1}
        for w in weights:
            grown = dict(table)
            for (k, acc), c in table.items():
                key = (k + 1, acc + w)
                grown[key] = grown.get(key, 0) + c
            table = grown
        return cls(table)

    def excluding(self, weight: int) -> dict[tuple[int, int], int]:
        """Counts over subsets that omit one player of the given weight.

        Uses the recurrence C[k][acc] = A[k][acc] - C[k-1][acc-weight],
        valid because A = C * (1 + x^weight * y) as generating functions.
        """
        out: dict[tuple[int, int], int] = {}
        for key in sorted(self.table):
            k, acc = key
            c = self.table[key] - out.get((k - 1, acc - weight), 0)
            if c:
                out[key] = c
        return out

    def total(self) -> int:
        return sum(self.table.values())


def make_game(shares: Sequence[float], *, grid: int = DEFAULT_GRID) -> WeightedVotingGame:
    """Build the strict-majority voting game on the given share weights.

    Raises ValueError on an empty list, any negative or non-finite share,
    an all-zero total, more than MAX_PLAYERS players, or grid < 1.
    """
    shares = tuple(float(s) for s in shares)
    if not shares:
        raise ValueError("a game needs at least one player")
    if len(shares) > MAX_PLAYERS:
        raise ValueError(f"at most {MAX_PLAYERS} players supported, got {len(shares)}")
    if grid < 1:
        raise ValueError("grid resolution must be a positive integer")
    for s in shares:
        if not math.isfinite(s):
            raise ValueError(f"weight {s!r} is not finite")
        if s < 0:
            raise ValueError(f"negative weight {s!r}")
    total = math.fsum(shares)
    if total <= 0:
        raise ValueError("total weight must be positive")
    int_weights = tuple(round(s / total * grid) for s in shares)
    return WeightedVotingGame(weights=shares, int_weights=int_weights, grid=grid)


def extend_with_residual(game: WeightedVotingGame, residual_share: float) -> WeightedVotingGame:
    """Append one extra player holding max(residual_share, 0).

    Negative or non-finite residuals clip to a zero-weight player, which is
    a dummy and leaves every other player's power unchanged. The quota is
    recomputed over the enlarged total.
    """
    residual = float(residual_share)
    if not math.isfinite(residual) or residual < 0:
        residual = 0.0
    return make_game(game.weights + (residual,), grid=game.grid)


def is_winning(game: WeightedVotingGame, coalition: Iterable[int]) -> bool:
    """True iff the coalition's weight strictly exceeds half the game total."""
    members = set(coalition)
    for i in members:
        if not 0 <= i < game.n:
            raise ValueError(f"player index {i} out of range for {game.n} players")
    acc = sum(game.int_weights[i] for i in members)
    return 2 * acc > game.int_total


def _pivot_coeffs(n: int) -> list[int]:
    # k!(n-1-k)! for k = 0..n-1; dividing by n! happens once at the end
    fact = [math.factorial(i) for i in range(n + 1)]
    return [fact[k] * fact[n - 1 - k] for k in range(n)]


def spi_permutation_oracle(game: WeightedVotingGame) -> PowerProfile:
    """Reference computation by full enumeration of all n! player orderings.

    In every ordering exactly one player tips the accumulating coalition
    from losing to winning; their pivot count over n! is their power.
    Refuses games above ORACLE_MAX_PLAYERS players.
    """
    n = game.n
    if n > ORACLE_MAX_PLAYERS:
        raise ValueError(f"oracle enumeration is limited to {ORACLE_MAX_PLAYERS} players")
    weights = game.int_weights
    total = game.int_total
    counts = [0] * n
    for perm in itertools.permutations(range(n)):
        acc = 0
        for p in perm:
            acc += weights[p]
            if 2 * acc > total:
                counts[p] += 1
                break
    n_fact = math.factorial(n)
    return PowerProfile(tuple(Fraction(c, n_fact) for c in counts))


def spi_subset(game: WeightedVotingGame) -> PowerProfile:
    """Power via enumeration of all 2^n coalitions.

    Player i is credited k!(n-1-k)!/n! for every size-k subset S not
    containing i with S losing and S + {i} winning. Cost grows as n * 2^n.
    """
    n = game.n
    weights = game.int_weights
    total = game.int_total
    # accumulated weight of every bitmask, built from the lowest set bit
    acc = [0] * (1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        acc[mask] = acc[mask ^ low] + weights[low.bit_length() - 1]
    coeffs = _pivot_coeffs(n)
    nums = [0] * n
    for mask in range(1 << n):
        w = acc[mask]
        if 2 * w > total:
            continue  # S already wins, nobody can pivot into it
        coef = coeffs[mask.bit_count()]
        for i in range(n):
            if not (mask >> i) & 1 and 2 * (w + weights[i]) > total:
                nums[i] += coef
    n_fact = math.factorial(n)
    return PowerProfile(tuple(Fraction(v, n_fact) for v in nums))


def spi_dp(game: WeightedVotingGame) -> PowerProfile:
    """Power via generating-function coalition counting.

    One dynamic program over (size, weight) covers all players; each
    player's own factor is divided back out, so the cost is bounded by the
    number of distinct (size, weight) states rather than raw 2^n whenever
    weights collide on the grid.
    """
    n = game.n
    weights = game.int_weights
    total = game.int_total
    counts = CoalitionCount.build(weights)
    coeffs = _pivot_coeffs(n)
    n_fact = math.factorial(n)
    values = []
    for w_i in weights:
        others = counts.excluding(w_i)
        num = 0
        for (k, acc), c in others.items():
            if 2 * acc <= total < 2 * (acc + w_i):
                num += c * coeffs[k]
        values.append(Fraction(num, n_fact))
    return PowerProfile(tuple(values))


def spi_single(game: WeightedVotingGame, player: int) -> Fraction:
    """One player's power without building the full profile.

    Same pivot combinatorics as spi_dp, but the dynamic program runs only
    over the other players; used in bulk by the statistics pipeline.
    """
    n = game.n
    if not 0 <= player < n:
        raise ValueError(f"player index {player} out of range for {n} players")
    weights = game.int_weights
    total = game.int_total
    w_i = weights[player]
    table: dict[tuple[int, int], int] = {(0, 0): 1}
    for j, w in enumerate(weights):
        if j == player:
            continue
        grown = dict(table)
        for (k, acc), c in table.items():
            key = (k + 1, acc + w)
            grown[key] = grown.get(key, 0) + c
        table = grown
    coeffs = _pivot_coeffs(n)
    num = 0
    for (k, acc), c in table.items():
        if 2 * acc <= total < 2 * (acc + w_i):
            num += c * coeffs[k]
    return Fraction(num, math.factorial(n))
