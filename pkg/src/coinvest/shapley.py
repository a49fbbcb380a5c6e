"""Payoff division and stability analysis for transferable-utility games.

Three independent routes to the Shapley value (exact subset enumeration, a
closed form exploiting the owner's veto structure, and permutation sampling)
plus brute-force checkers for core membership and supermodularity, player
classification, and the up-front payment settlement.

The enumeration, sampling and checker functions only need an object with a
``players`` tuple and a ``value(coalition)`` method, so they also run on
hand-built characteristic functions (see :class:`TabularGame`); the closed
form and the settlement need a full :class:`~coinvest.game.GameInstance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np

from .game import (
    NO,
    Coalition,
    GameInstance,
    PayoffVector,
    Settlement,
    coalition_value,
    grand_allocation,
    provider_revenue,
)

#: Subset enumeration (Shapley, core, classification) is capped here.
MAX_ENUMERATION_PLAYERS = 20
#: The nested-subset scan of the supermodularity check is capped lower.
MAX_SUPERMODULARITY_PLAYERS = 12

# Up to this many players the sampler precomputes a full value table and
# walks permutations vectorized; beyond it, it evaluates prefixes one by one.
_TABLE_PLAYERS = 16


class ShapleyMethod(str, Enum):
    SUBSET_ENUMERATION = "enum"
    CLOSED_FORM = "closed"
    PERMUTATION_SAMPLING = "sample"


@dataclass(frozen=True)
class ShapleyResult:
    """Payoff vector plus how it was obtained.

    ``stderr`` carries one standard error per player for the sampling method
    and is None for the exact methods.
    """

    payoffs: dict[str, float]
    method: ShapleyMethod
    sample_count: int | None = None
    stderr: dict[str, float] | None = None


@dataclass(frozen=True)
class CoreCheck:
    """Outcome of the exhaustive core test.

    ``violating_coalition`` is the first coalition found that could do better
    on its own; ``slack`` (optional) maps every coalition to payoff minus
    value, nonnegative everywhere iff rationality holds.
    """

    in_core: bool
    violating_coalition: Coalition | None = None
    slack: dict[Coalition, float] | None = None


@dataclass(frozen=True)
class SupermodularityReport:
    """Outcome of the brute-force supermodularity test.

    On failure, ``counterexample`` is a ``(player, smaller, larger)`` triple of
    nested coalitions where the player's marginal contribution shrank.
    """

    holds: bool
    counterexample: tuple[str, Coalition, Coalition] | None = None


class PlayerFlags(NamedTuple):
    veto: bool
    null: bool


class TabularGame:
    """Characteristic function given explicitly as a table.

    Lets the checkers and estimators run on hand-built games, including ones
    the coinvestment model can never produce (e.g. non-convex fixtures).
    Coalitions missing from the table take ``default``; pass ``default=None``
    to require a complete table.
    """

    def __init__(self, players: Iterable[str], values: dict, default: float | None = 0.0):
        self.players = tuple(players)
        known = frozenset(self.players)
        if len(known) != len(self.players):
            raise ValueError(f"player ids must be unique, got {self.players!r}")
        self._values: dict[Coalition, float] = {}
        for coal, val in values.items():
            members = frozenset(coal)
            if not members <= known:
                raise ValueError(f"table entry {sorted(members)!r} references unknown players")
            self._values[members] = float(val)
        self._default = None if default is None else float(default)

    def value(self, coalition: Iterable[str]) -> float:
        members = frozenset(coalition)
        if not members <= frozenset(self.players):
            raise ValueError(f"coalition references unknown players: {sorted(members)!r}")
        got = self._values.get(members)
        if got is not None:
            return got
        if self._default is None:
            raise KeyError(f"no value for coalition {sorted(members)!r}")
        return self._default


def _value_table(game, players: tuple[str, ...]) -> np.ndarray:
    """Value of every coalition, indexed by membership bitmask over ``players``."""
    n = len(players)
    table = np.empty(1 << n)
    for mask in range(1 << n):
        table[mask] = game.value(frozenset(players[i] for i in range(n) if mask >> i & 1))
    return table


def _mask_coalition(mask: int, players: tuple[str, ...]) -> Coalition:
    return frozenset(players[i] for i in range(len(players)) if mask >> i & 1)


def marginal_contribution(game, player: str, coalition: Iterable[str]) -> float:
    """Value the player adds on joining: v(S + player) - v(S)."""
    members = frozenset(coalition)
    if player in members:
        raise ValueError(f"player {player!r} is already in the coalition")
    return float(game.value(members | {player}) - game.value(members))


def shapley_enumeration(game) -> ShapleyResult:
    """Exact Shapley payoffs by weighted subset enumeration.

    For each player, sums ``|S|! * (n-|S|-1)! / n!`` times its marginal
    contribution over every coalition S avoiding it.
    """
    players = tuple(game.players)
    n = len(players)
    if n > MAX_ENUMERATION_PLAYERS:
        raise ValueError(
            f"{n} players exceeds the enumeration bound of {MAX_ENUMERATION_PLAYERS}; "
            "use shapley_sampling instead"
        )
    table = _value_table(game, players)
    fact = [math.factorial(k) for k in range(n + 1)]
    weight = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    payoffs = {}
    for i, pid in enumerate(players):
        bit = 1 << i
        acc = 0.0
        for mask in range(1 << n):
            if mask & bit:
                continue
            acc += weight[mask.bit_count()] * (table[mask | bit] - table[mask])
        payoffs[pid] = float(acc)
    return ShapleyResult(payoffs=payoffs, method=ShapleyMethod.SUBSET_ENUMERATION)


def shapley_closed_form(game: GameInstance) -> ShapleyResult:
    """O(N) Shapley payoffs exploiting the owner's veto structure.

    A provider contributes its standalone profit m_i exactly when the owner
    arrives before it, which happens in half of all orderings, so it gets
    m_i / 2; the owner collects the remaining half of the total.
    """
    optima = game.standalone_optima()
    payoffs = {sp.id: optima[sp.id].value / 2.0 for sp in game.sps}
    payoffs[NO] = math.fsum(opt.value for opt in optima.values()) / 2.0
    return ShapleyResult(payoffs=payoffs, method=ShapleyMethod.CLOSED_FORM)


def shapley_sampling(game, samples: int, seed: int = 0) -> ShapleyResult:
    """Monte Carlo Shapley estimate from random arrival orders.

    Averages each player's marginal contribution over ``samples`` uniformly
    random permutations. Unbiased, deterministic for a fixed seed, and the
    estimates sum to the grand value exactly (each permutation telescopes).
    Reports one standard error per player.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    players = tuple(game.players)
    n = len(players)
    rng = np.random.default_rng(seed)
    if n <= _TABLE_PLAYERS:
        mean, se = _sample_with_table(game, players, samples, rng)
    else:
        mean, se = _sample_walking(game, players, samples, rng)
    return ShapleyResult(
        payoffs={pid: float(mean[i]) for i, pid in enumerate(players)},
        method=ShapleyMethod.PERMUTATION_SAMPLING,
        sample_count=int(samples),
        stderr={pid: float(se[i]) for i, pid in enumerate(players)},
    )


def _finalize_stats(sums: np.ndarray, sqs: np.ndarray, samples: int):
    mean = sums / samples
    var = np.maximum(sqs / samples - mean * mean, 0.0)
    if samples > 1:
        var *= samples / (samples - 1)
    return mean, np.sqrt(var / samples)


def _sample_with_table(game, players, samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    n = len(players)
    table = _value_table(game, players)
    sums = np.zeros(n)
    sqs = np.zeros(n)
    remaining = samples
    while remaining:
        block = min(remaining, 1 << 17)
        order = np.argsort(rng.random((block, n)), axis=1)
        masks = np.bitwise_or.accumulate(np.left_shift(1, order), axis=1)
        prev = np.concatenate([np.zeros((block, 1), dtype=masks.dtype), masks[:, :-1]], axis=1)
        marginals = table[masks] - table[prev]
        idx = order.ravel()
        m = marginals.ravel()
        sums += np.bincount(idx, weights=m, minlength=n)
        sqs += np.bincount(idx, weights=m * m, minlength=n)
        remaining -= block
    return _finalize_stats(sums, sqs, samples)


def _sample_walking(game, players, samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    n = len(players)
    sums = np.zeros(n)
    sqs = np.zeros(n)
    for _ in range(samples):
        members: set[str] = set()
        prev = game.value(frozenset())
        for idx in rng.permutation(n):
            members.add(players[idx])
            cur = game.value(frozenset(members))
            delta = cur - prev
            sums[idx] += delta
            sqs[idx] += delta * delta
            prev = cur
    return _finalize_stats(sums, sqs, samples)


def check_core(game, payoffs: PayoffVector, *, include_slack: bool = False,
               tol: float = 1e-9) -> CoreCheck:
    """Exhaustively test whether a payoff vector sits in the core.

    Every coalition must collectively receive at least its own value
    (``tol`` absolute slack absorbs float noise) and the payoffs must exactly
    exhaust the grand value (relative tolerance).
    """
    players = tuple(game.players)
    n = len(players)
    if n > MAX_ENUMERATION_PLAYERS:
        raise ValueError(
            f"{n} players exceeds the enumeration bound of {MAX_ENUMERATION_PLAYERS}"
        )
    missing = [p for p in players if p not in payoffs]
    if missing:
        raise ValueError(f"payoff vector is missing players {missing!r}")
    x = [float(payoffs[p]) for p in players]
    table = _value_table(game, players)
    slack: dict[Coalition, float] = {}
    violating: Coalition | None = None
    for mask in range(1 << n):
        paid = 0.0
        mm = mask
        while mm:
            low = mm & -mm
            paid += x[low.bit_length() - 1]
            mm ^= low
        gap = paid - table[mask]
        if include_slack:
            slack[_mask_coalition(mask, players)] = float(gap)
        if gap < -tol and violating is None:
            violating = _mask_coalition(mask, players)
            if not include_slack:
                break
    grand = float(table[(1 << n) - 1])
    efficient = abs(math.fsum(x) - grand) <= 1e-9 * max(1.0, abs(grand))
    return CoreCheck(
        in_core=violating is None and efficient,
        violating_coalition=violating,
        slack=slack if include_slack else None,
    )


def check_supermodularity(game, *, tol: float = 1e-9) -> SupermodularityReport:
    """Brute-force test that marginal contributions grow with the coalition.

    Verifies ``v(T+i) - v(T) <= v(S+i) - v(S) + tol`` for every player i and
    every nested pair T subseteq S of coalitions avoiding i.
    """
    players = tuple(game.players)
    n = len(players)
    if n > MAX_SUPERMODULARITY_PLAYERS:
        raise ValueError(
            f"{n} players exceeds the supermodularity-check bound of "
            f"{MAX_SUPERMODULARITY_PLAYERS}"
        )
    table = _value_table(game, players)
    full = (1 << n) - 1
    for i, pid in enumerate(players):
        bit = 1 << i
        others = full ^ bit
        s = others
        while True:
            delta_s = table[s | bit] - table[s]
            t = s
            while True:
                if table[t | bit] - table[t] > delta_s + tol:
                    return SupermodularityReport(
                        holds=False,
                        counterexample=(
                            pid,
                            _mask_coalition(t, players),
                            _mask_coalition(s, players),
                        ),
                    )
                if t == 0:
                    break
                t = (t - 1) & s
            if s == 0:
                break
            s = (s - 1) & others
    return SupermodularityReport(holds=True, counterexample=None)


def classify_players(game, *, tol: float = 0.0) -> dict[str, PlayerFlags]:
    """Flag veto players and null players.

    A veto player makes every coalition without it worthless; a null player
    adds nothing to any coalition. In a degenerate all-zero game a player can
    be both.
    """
    players = tuple(game.players)
    n = len(players)
    if n > MAX_ENUMERATION_PLAYERS:
        raise ValueError(
            f"{n} players exceeds the enumeration bound of {MAX_ENUMERATION_PLAYERS}"
        )
    table = _value_table(game, players)
    flags = {}
    for i, pid in enumerate(players):
        bit = 1 << i
        veto = True
        null = True
        for mask in range(1 << n):
            if mask & bit:
                continue
            if veto and abs(table[mask]) > tol:
                veto = False
            if null and abs(table[mask | bit] - table[mask]) > tol:
                null = False
            if not veto and not null:
                break
        flags[pid] = PlayerFlags(veto=veto, null=null)
    return flags


def settle(game: GameInstance, payoffs: PayoffVector) -> Settlement:
    """Split the up-front capacity bill implied by a payoff vector.

    Each provider's revenue is what its served load earns over the horizon at
    the grand-coalition allocation; the owner earns nothing directly. The
    payment closes the gap between revenue and promised payoff, so payments
    sum to the capacity cost ``d * C`` and players with more payoff than
    revenue (always the owner) are paid rather than paying.
    """
    players = game.players
    missing = [p for p in players if p not in payoffs]
    if missing:
        raise ValueError(f"payoff vector is missing players {missing!r}")
    grand = coalition_value(game, players)
    total = math.fsum(float(payoffs[p]) for p in players)
    if abs(total - grand) > 1e-6 * max(1.0, abs(grand)):
        raise ValueError(
            f"payoffs sum to {total!r} but the grand coalition is worth {grand!r}"
        )
    alloc = grand_allocation(game)
    revenue = {sp.id: provider_revenue(sp, game.market, alloc.h[sp.id]) for sp in game.sps}
    revenue[NO] = 0.0
    payoff = {p: float(payoffs[p]) for p in players}
    payment = {p: revenue[p] - payoff[p] for p in players}
    return Settlement(revenue=revenue, payment=payment, payoff=payoff, allocation=alloc)
