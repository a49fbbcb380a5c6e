"""Command line front end: run scenario sweeps, verify game properties.

``coinvest run`` solves the configured scenario and writes three files into
the output directory: ``records.csv`` (one row per instance and player, fixed
column order), ``summary.json`` (per-instance payoffs, settlement, player
flags and check outcomes) and ``meta.json`` (the fully resolved config, tool
version and seed). ``coinvest verify`` runs the property suite on the same
instances and prints one pass/fail line per property. ``coinvest presets``
lists the configurations shipped with the package.

Exit codes: 0 success, 1 validation error, 2 property-check failure (under
``--strict`` or from ``verify``), 3 I/O error.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    config_to_dict,
    load_preset,
    parse_config,
    preset_names,
)
from .game import GameInstance, LoadProfile, ServiceProvider
from .scenarios import (
    clamping_applied,
    run_sweep,
    scale_load,
    scenario_omega,
    scenario_price_sweep,
    scenario_same_type,
    synth_load,
)
from .shapley import (
    MAX_ENUMERATION_PLAYERS,
    MAX_SUPERMODULARITY_PLAYERS,
    ShapleyMethod,
    check_core,
    check_supermodularity,
    classify_players,
    settle,
    shapley_closed_form,
    shapley_enumeration,
    shapley_sampling,
)

CSV_COLUMNS = (
    "scenario", "sweep_param", "sweep_value", "player_id", "beta", "daily_load",
    "h_star", "C_star", "r_hat", "shapley", "payment", "payoff", "v_grand",
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CHECK_FAILED = 2
EXIT_IO = 3


@click.group()
@click.version_option(version=__version__, prog_name="coinvest")
def main():
    """Plan a capacity coinvestment: solve it, split the payoff, settle the bill."""


def _load_config(config_arg: str) -> RunConfig:
    """Resolve a CLI config argument: preset name, file path, or inline JSON."""
    if config_arg in preset_names():
        return parse_config(load_preset(config_arg))
    return parse_config(config_arg)


def _build_groups(cfg: RunConfig):
    """Instances to solve, grouped as (label, sweep_param, sweep_values, games)."""
    if cfg.scenario == "same-type":
        games = [scenario_same_type(l, cfg.market, cfg.load_spec) for l in cfg.l_total_grid]
        return [("same-type", "l_total", list(cfg.l_total_grid), games)]
    if cfg.scenario == "omega":
        games = [scenario_omega(w, cfg.l_total, cfg.market, cfg.load_spec) for w in cfg.omega_grid]
        return [("omega", "omega", list(cfg.omega_grid), games)]
    if cfg.scenario == "price-sweep":
        groups = []
        for n in cfg.n_sps:
            games = scenario_price_sweep(n, cfg.d_grid, cfg.l_total, cfg.market, cfg.load_spec)
            groups.append((f"price-sweep-n{n}", "d", list(cfg.d_grid), games))
        return groups
    # custom: one instance assembled from the explicit provider list
    base = synth_load(cfg.load_spec)
    sps = []
    for spec in cfg.custom_sps:
        if spec.loads is not None:
            load = LoadProfile(spec.loads)
        else:
            if base.total <= 0.0 and spec.daily_total > 0.0:
                raise ConfigError(
                    f"custom_sps[{len(sps)}]: load shape sums to zero; give explicit loads"
                )
            factor = 0.0 if spec.daily_total == 0.0 else spec.daily_total / base.total
            load = scale_load(base, factor)
        sps.append(ServiceProvider(spec.id, spec.beta, load))
    try:
        game = GameInstance(market=cfg.market, sps=tuple(sps))
    except ValueError as exc:
        raise ConfigError(f"custom_sps: {exc}") from exc
    return [("custom", "index", [0.0], [game])]


def _rel_err(got: float, ref: float) -> float:
    return abs(got - ref) / max(1.0, abs(ref))


def _check_instance(game: GameInstance, record) -> dict[str, str]:
    """Stability and consistency checks backing summary.json and --strict."""
    payoffs = {p.player_id: p.payoff for p in record.players}
    checks = {}

    n = len(game.players)
    if n > MAX_ENUMERATION_PLAYERS:
        checks["core"] = f"skipped: {n} players exceeds the enumeration bound"
    else:
        core = check_core(game, payoffs)
        if core.in_core:
            checks["core"] = "pass"
        else:
            where = sorted(core.violating_coalition) if core.violating_coalition else "efficiency"
            checks["core"] = f"fail: blocked by {where}"

    if n > MAX_SUPERMODULARITY_PLAYERS:
        checks["supermodularity"] = f"skipped: {n} players exceeds the check bound"
    else:
        report = check_supermodularity(game)
        if report.holds:
            checks["supermodularity"] = "pass"
        else:
            pid, small, large = report.counterexample
            checks["supermodularity"] = (
                f"fail: player {pid} contributes less to {sorted(large)} than to {sorted(small)}"
            )

    bill = game.market.d * record.c_star
    paid = math.fsum(p.payment for p in record.players)
    if abs(paid - bill) <= 1e-6 * max(1.0, abs(bill)):
        checks["settlement_balance"] = "pass"
    else:
        checks["settlement_balance"] = f"fail: payments sum to {paid!r}, capacity bill is {bill!r}"
    return checks


def _summarize(game: GameInstance, record) -> dict:
    n = len(game.players)
    flags = classify_players(game) if n <= MAX_ENUMERATION_PLAYERS else None
    players = {}
    for p in record.players:
        entry = {
            "beta": p.beta,
            "daily_load": p.daily_load,
            "h_star": p.h_star,
            "r_hat": p.r_hat,
            "shapley": p.shapley,
            "payment": p.payment,
            "payoff": p.payoff,
        }
        if flags is not None:
            entry["veto"] = flags[p.player_id].veto
            entry["null"] = flags[p.player_id].null
        players[p.player_id] = entry
    return {
        "scenario": record.scenario,
        "sweep_param": record.sweep_param,
        "sweep_value": record.sweep_value,
        "v_grand": record.v_grand,
        "c_star": record.c_star,
        "players": players,
        "checks": _check_instance(game, record),
    }


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _records_csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        for p in rec.players:
            writer.writerow(
                [
                    rec.scenario,
                    rec.sweep_param,
                    _fmt(rec.sweep_value),
                    p.player_id,
                    _fmt(p.beta),
                    _fmt(p.daily_load),
                    _fmt(p.h_star),
                    _fmt(rec.c_star),
                    _fmt(p.r_hat),
                    _fmt(p.shapley),
                    _fmt(p.payment),
                    _fmt(p.payoff),
                    _fmt(rec.v_grand),
                ]
            )
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@main.command()
@click.argument("config")
@click.option("--out", "out_dir", default=None, help="Output directory (overrides the config).")
@click.option("--strict", is_flag=True, help="Exit nonzero if any property check fails.")
@click.option("--seed", type=int, default=None, help="Random seed (overrides the config).")
@click.option(
    "--method",
    type=click.Choice([m.value for m in ShapleyMethod]),
    default=None,
    help="Shapley method (overrides the config).",
)
def run(config, out_dir, strict, seed, method):
    """Solve the configured scenario and write records.csv, summary.json, meta.json.

    CONFIG is a preset name, a JSON file path, or inline JSON.
    """
    try:
        cfg = _load_config(config)
        if out_dir is not None:
            cfg = replace(cfg, out_dir=out_dir)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if method is not None:
            cfg = replace(cfg, method=ShapleyMethod(method))
        groups = _build_groups(cfg)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc

    records = []
    summaries = []
    try:
        for label, param, values, games in groups:
            recs = run_sweep(
                games,
                scenario=label,
                sweep_param=param,
                sweep_values=values,
                method=cfg.method,
                samples=cfg.samples,
                seed=cfg.seed,
            )
            records.extend(recs)
            summaries.extend(_summarize(game, rec) for game, rec in zip(games, recs))
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc)) from exc

    failures = [
        (i, name, outcome)
        for i, summary in enumerate(summaries)
        for name, outcome in summary["checks"].items()
        if outcome.startswith("fail")
    ]
    meta = {
        "tool": "coinvest",
        "version": __version__,
        "seed": cfg.seed,
        "strict": bool(strict),
        "config": config_to_dict(cfg),
        "load_clamping_applied": clamping_applied(cfg.load_spec),
        "instances": len(records),
    }
    summary_doc = {
        "instances": summaries,
        "all_checks_passed": not failures,
    }

    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "records.csv", _records_csv_text(records))
        _atomic_write(out / "summary.json", json.dumps(summary_doc, indent=2, sort_keys=True) + "\n")
        _atomic_write(out / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        click.echo(f"error: cannot write outputs to {out}: {exc}", err=True)
        raise SystemExit(EXIT_IO) from exc

    click.echo(f"wrote {len(records)} records to {out / 'records.csv'}")
    if failures:
        for index, name, outcome in failures:
            click.echo(f"check failed on instance {index}: {name}: {outcome}", err=True)
        if strict:
            raise SystemExit(EXIT_CHECK_FAILED)


@main.command()
@click.argument("config")
def verify(config):
    """Run the property suite on the configured instances and report pass/fail.

    Properties: supermodularity of every instance, core membership of the
    Shapley payoffs, agreement of the three Shapley routes, and settlement
    balance. CONFIG is a preset name, a JSON file path, or inline JSON.
    """
    try:
        cfg = _load_config(config)
        groups = _build_groups(cfg)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc

    games = [game for _, _, _, group in groups for game in group]
    results = {
        "supermodularity": _verify_supermodularity(games),
        "core-membership": _verify_core(games),
        "oracle-triangle": _verify_oracles(games, cfg),
        "settlement-balance": _verify_settlement(games),
    }
    failed = False
    for name, (ok, detail) in results.items():
        click.echo(f"{name:<22} {'PASS' if ok else 'FAIL'}  ({detail})")
        failed = failed or not ok
    if failed:
        raise SystemExit(EXIT_CHECK_FAILED)


def _verify_supermodularity(games):
    checked = 0
    for game in games:
        if len(game.players) > MAX_SUPERMODULARITY_PLAYERS:
            continue
        report = check_supermodularity(game)
        if not report.holds:
            pid, small, large = report.counterexample
            return False, f"player {pid}: T={sorted(small)}, S={sorted(large)}"
        checked += 1
    return True, f"{checked}/{len(games)} instances"


def _verify_core(games):
    checked = 0
    for game in games:
        if len(game.players) > MAX_ENUMERATION_PLAYERS:
            continue
        result = check_core(game, shapley_closed_form(game).payoffs)
        if not result.in_core:
            where = sorted(result.violating_coalition) if result.violating_coalition else "efficiency"
            return False, f"blocked by {where}"
        checked += 1
    return True, f"{checked}/{len(games)} instances"


def _verify_oracles(games, cfg: RunConfig):
    checked = 0
    for k, game in enumerate(games):
        if len(game.players) > MAX_ENUMERATION_PLAYERS:
            continue
        exact = shapley_enumeration(game).payoffs
        closed = shapley_closed_form(game).payoffs
        for pid in game.players:
            if _rel_err(closed[pid], exact[pid]) > 1e-9:
                return False, f"closed form vs enumeration diverges for {pid}"
        sampled = shapley_sampling(game, cfg.samples, cfg.seed + k)
        for pid in game.players:
            # 4 standard errors: this gate spans hundreds of simultaneous
            # estimates per run, where a 3-sigma cut trips spuriously
            # (~0.3% per estimate by the estimator's own correctness)
            margin = 4.0 * sampled.stderr[pid] + 1e-9 * max(1.0, abs(exact[pid]))
            if abs(sampled.payoffs[pid] - exact[pid]) > margin:
                return False, f"sampling off by more than 4 standard errors for {pid}"
        checked += 1
    return True, f"{checked}/{len(games)} instances"


def _verify_settlement(games):
    for game in games:
        settlement = settle(game, shapley_closed_form(game).payoffs)
        bill = game.market.d * settlement.allocation.C
        paid = math.fsum(settlement.payment.values())
        if abs(paid - bill) > 1e-6 * max(1.0, abs(bill)):
            return False, f"payments sum to {paid!r}, bill is {bill!r}"
        for pid in game.players:
            identity = settlement.revenue[pid] - settlement.payment[pid]
            if _rel_err(settlement.payoff[pid], identity) > 1e-9:
                return False, f"payoff identity broken for {pid}"
    return True, f"{len(games)}/{len(games)} instances"


@main.command()
def presets():
    """List the configuration presets shipped with the package."""
    for name in preset_names():
        cfg = parse_config(load_preset(name))
        click.echo(f"{name:<8} {cfg.scenario:<12} {cfg.description}")


if __name__ == "__main__":
    main()
