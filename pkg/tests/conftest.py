"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately avoid the production shortcuts: Shapley values are
re-derived by averaging over every arrival order, and single-provider optima
by dense grid search over the raw objective.
"""

import itertools
import math

import numpy as np
import pytest

from coinvest import (
    GameInstance,
    MarketParams,
    ServiceProvider,
    SinusoidalLoadSpec,
    TabularGame,
    amortized_unit_price,
    scale_load,
    synth_load,
)


def shapley_by_orderings(players, value_fn):
    """Average marginal contribution over every arrival order.

    Exponential-time reference implementation, independent of the subset-weight
    formula used in production.
    """
    players = tuple(players)
    totals = {p: 0.0 for p in players}
    count = 0
    for order in itertools.permutations(players):
        members = frozenset()
        prev = value_fn(members)
        for p in order:
            members = members | {p}
            cur = value_fn(members)
            totals[p] += cur - prev
            prev = cur
        count += 1
    return {p: totals[p] / count for p in players}


def grid_max_single(sp, market, steps=1_000_000):
    """Grid-search oracle for the one-provider profit maximization.

    Returns (argmax, max, step) over a uniform grid on the same bracket the
    numeric maximizer uses.
    """
    D, d, xi = market.D, market.d, market.xi
    daily_total = sp.load.total
    gain = D * xi * sp.beta * daily_total / d
    h_max = math.log(max(math.e, gain)) / xi + 10.0 / xi
    h = np.linspace(0.0, h_max, steps + 1)
    profit = D * sp.beta * daily_total * (1.0 - np.exp(-xi * h)) - d * h
    k = int(np.argmax(profit))
    return float(h[k]), float(profit[k]), float(h_max / steps)


def grid_max_joint(game, steps=2000):
    """Joint brute force over the two providers' allocations.

    Evaluates the coalition objective on a 2-D grid of (h1, h2) and returns
    (best value, worst-case gap bound of the discretization).
    """
    assert len(game.sps) == 2
    m = game.market
    axes = []
    deltas = []
    for sp in game.sps:
        daily_total = sp.load.total
        gain = m.D * m.xi * sp.beta * daily_total / m.d
        h_max = math.log(max(math.e, gain)) / m.xi + 10.0 / m.xi
        h = np.linspace(0.0, h_max, steps + 1)
        axes.append(m.D * sp.beta * daily_total * (1.0 - np.exp(-m.xi * h)) - m.d * h)
        deltas.append(h_max / steps)
    joint = axes[0][:, None] + axes[1][None, :]
    # near each interior optimum the objective is flat: the grid misses at
    # most ~0.5 * d * xi * delta^2 per provider (curvature at the optimum)
    bound = sum(1.1 * 0.5 * m.d * m.xi * delta**2 for delta in deltas)
    return float(joint.max()), bound


def random_load(rng, market, total):
    """A random sinusoidal daily shape rescaled to the requested total."""
    spec = SinusoidalLoadSpec(
        a0=float(rng.uniform(0.5, 2.0)),
        components=(
            (float(rng.uniform(0.0, 0.6)), float(rng.uniform(0.0, market.T))),
            (float(rng.uniform(0.0, 0.3)), float(rng.uniform(0.0, market.T))),
        ),
        T=market.T,
    )
    base = synth_load(spec)
    return scale_load(base, total / base.total)


def random_game(rng, n_sps=None, market=None):
    """A randomized instance: N providers with random rates and load shapes."""
    market = market or MarketParams()
    n = int(n_sps if n_sps is not None else rng.integers(1, 8))
    price = amortized_unit_price(market)
    sps = []
    for k in range(n):
        beta = float(rng.uniform(0.0, 5.0 * price))
        total = float(rng.uniform(5e4, 2e6))
        sps.append(ServiceProvider(f"SP{k + 1}", beta, random_load(rng, market, total)))
    return GameInstance(market=market, sps=tuple(sps))


def veto_table_game(contributions):
    """A hand-built table game with the coinvestment structure.

    ``contributions`` maps provider ids to their standalone profits; any
    coalition containing "NO" is worth the sum of its providers' profits,
    anything without "NO" is worth zero.
    """
    players = tuple(contributions) + ("NO",)
    values = {}
    provider_ids = tuple(contributions)
    for r in range(len(provider_ids) + 1):
        for chosen in itertools.combinations(provider_ids, r):
            worth = math.fsum(contributions[p] for p in chosen)
            values[frozenset(chosen)] = 0.0
            values[frozenset(chosen) | {"NO"}] = worth
    return TabularGame(players, values, default=None)


@pytest.fixture
def market():
    return MarketParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
