"""consensus-lab command line.

Exit codes: 0 success, 2 user error, 3 numerical non-convergence, 4 budget exceeded.
Every JSON output carries the resolved config and seed under "config"; `replay`
re-runs a saved output and reproduces it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import adversary, capacity, coding, simulation
from .channel import BroadcastChannel, channel_to_dict, load_channel, make_family
from .common import build_common_structure, find_mixing_kernel
from .decoding import DecoderConfig, ErasureDecoder, GeneralTypeDecoder, SharedRandomnessDecoder, naive_decoder
from .errors import ConsensusLabError

SCHEMA_VERSION = 1
SEED_ENV = "CONSENSUS_LAB_SEED"
TOOL = "consensus-lab"


# --- shared plumbing -----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, int) and abs(obj) >= 2**63:
        return str(obj)
    return obj


def _dump(payload: dict, output: str | None) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    _write(text, output)


def _write(text: str, output: str | None) -> None:
    if output in (None, "-"):
        click.echo(text, nl=False)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _csv(rows: list[dict], columns: list[str], kind: str, config: dict, output: str | None) -> None:
    buf = io.StringIO()
    buf.write(f"# {TOOL} {kind} schema_version={SCHEMA_VERSION}\n")
    buf.write("# config=" + json.dumps(_jsonable(config), sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _jsonable(r.get(k)) for k in columns})
    _write(buf.getvalue(), output)


def _config(ctx: click.Context) -> dict:
    params = {k: v for k, v in ctx.params.items() if k not in ("output", "plot")}
    return {"command": ctx.command.name, "params": _jsonable(params), "seed": ctx.obj["seed"], "schema_version": SCHEMA_VERSION}


def _parse_params(pairs: tuple[str, ...]) -> dict[str, float]:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected name=value, got {item!r}", param_hint="--param")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise click.BadParameter(f"{key} must be numeric", param_hint="--param") from None
    return out


def _channel(channel: str | None, family: str | None, params: tuple[str, ...]) -> BroadcastChannel:
    if (channel is None) == (family is None):
        raise click.UsageError("give exactly one of --channel FILE or --family NAME")
    if channel is not None:
        return load_channel(channel)
    return make_family(family, **_parse_params(params))


def channel_options(f):
    f = click.option("--param", "params", multiple=True, help="Family parameter name=value (repeatable).")(f)
    f = click.option("--family", help="Built-in family: two-step-bec, independent-bec, fig3, identity.")(f)
    f = click.option("--channel", type=click.Path(exists=True, dir_okay=False), help="Channel JSON file.")(f)
    return f


def output_option(f):
    return click.option("-o", "--output", type=click.Path(dir_okay=False), help="Output file (default stdout).")(f)


def plot_option(f):
    return click.option("--plot", type=click.Path(dir_okay=False), help="Also render a figure to this file.")(f)


def code_options(f):
    f = click.option("--code-distance", type=int, default=None, help="Minimum Hamming distance for generated codes.")(f)
    f = click.option("--rate", type=float, default=None, help="Rate R for generated codes.")(f)
    f = click.option("-n", "--n", "n", type=int, default=None, help="Block length for generated codes.")(f)
    f = click.option("--codebook", "codebook_path", type=click.Path(exists=True, dir_okay=False), help="Codebook JSON file.")(f)
    return f


def _codebook(codebook_path, n, rate, code_distance, delta):
    if codebook_path:
        return coding.load_codebook(codebook_path)
    if n is None or rate is None:
        raise click.UsageError("give --codebook FILE or both -n and --rate")
    dist = code_distance if code_distance is not None else max(1, math.ceil(2 * delta * n - 1e-12))
    return coding.linear_codebook(n, rate, dist)


def _decoder(name: str, cb, cs, delta: float, epsilon: float, ell: int | None):
    cfg = DecoderConfig(delta=delta, epsilon=epsilon, ell=ell)
    if name == "erasure":
        return ErasureDecoder(cb, cs, delta)
    if name == "naive":
        return naive_decoder(cb, cs)
    if name == "general":
        return GeneralTypeDecoder(cb, cs, cfg)
    return SharedRandomnessDecoder(cb, cfg)


def _menu(text: str, n: int, delta: float, K: int) -> list[adversary.Attack]:
    if text in ("", "none"):
        return []
    if text == "default":
        return adversary.attack_menu(n, delta, K)
    menu = []
    for item in text.split(","):
        name, _, arg = item.strip().partition(":")
        if name == "boundary":
            flips = adversary.boundary_flips(n, delta) if arg in ("", "edge") else int(arg)
            menu.append(adversary.Attack(f"boundary-{flips}", "boundary", {"flips": flips}))
        elif name == "hybrid":
            k = int(arg) if arg else n // 2
            menu.append(adversary.Attack(f"hybrid-k{k}", "hybrid", {"k": k, "m": 0, "mhat": 1}))
        elif name in ("mixing", "honest"):
            menu.append(adversary.Attack(name, name, {"m": 0}))
        else:
            raise click.BadParameter(f"unknown attack {name!r}", param_hint="--attacks")
    return menu


def _frange(text: str) -> tuple[str, list[float]]:
    name, sep, rng = text.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise click.BadParameter("expected name=start:stop:step", param_hint="--sweep")
    a, b, s = map(float, parts)
    if s <= 0:
        raise click.BadParameter("step must be positive", param_hint="--sweep")
    count = int(math.floor((b - a) / s + 1e-9)) + 1
    return name.strip(), [round(a + i * s, 12) for i in range(count)]


# --- commands ------------------------------------------------------------------------


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help=f"Base seed; the {SEED_ENV} variable overrides it.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: all cores).")
@click.pass_context
def cli(ctx: click.Context, seed: int, threads: int | None) -> None:
    """Consensus over noisy broadcast channels."""
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise click.BadParameter(f"{SEED_ENV} must be an integer") from None
    ctx.ensure_object(dict)
    ctx.obj.setdefault("seed", seed)
    ctx.obj.setdefault("threads", threads or os.cpu_count() or 1)


@cli.command()
@channel_options
@output_option
@click.pass_context
def analyze(ctx, channel, family, params, output):
    """Characteristic graph, common channel, effective alphabet, margins and mixing kernel."""
    ch = _channel(channel, family, params)
    cs = build_common_structure(ch)
    report = cs.to_dict()
    report["mixing_kernel"] = find_mixing_kernel(cs.wv).matrix.tolist()
    if report["singleton_effective_alphabet"]:
        report["notes"] = ["effective alphabet is a singleton: consensus capacity is 0"]
    _dump({"config": _config(ctx), "channel": channel_to_dict(ch), "result": report}, output)


@cli.command(name="capacity")
@channel_options
@click.option("--tol", type=float, default=capacity.DEFAULT_TOL, show_default=True)
@click.option("--sweep", default=None, help="Sweep a family parameter: name=start:stop:step (CSV output).")
@output_option
@plot_option
@click.pass_context
def capacity_cmd(ctx, channel, family, params, tol, sweep, output, plot):
    """Common-channel, consensus and common-message capacities."""
    if sweep is None:
        ch = _channel(channel, family, params)
        rep = capacity.capacity_report(ch, tol)
        _dump({"config": _config(ctx), "result": rep.to_dict()}, output)
        return
    if family is None:
        raise click.UsageError("--sweep needs --family")
    name, values = _frange(sweep)
    fixed = _parse_params(params)
    rows = []
    for v in values:
        ch = make_family(family, **{**fixed, name: v})
        c = capacity.capacity_report(ch, tol)
        rows.append({"param": name, "value": v, "c_p2p_common": c.values[0], "c_byz": c.values[1], "c_com_msg": c.values[2]})
    _csv(rows, ["param", "value", "c_p2p_common", "c_byz", "c_com_msg"], "capacity-sweep", _config(ctx), output)
    if plot:
        from .plotting import plot_capacity_sweep

        plot_capacity_sweep(name, rows, plot, title=family)


@cli.command()
@channel_options
@click.option("--kind", type=click.Choice(["linear", "gv", "constant-type"]), default="linear", show_default=True)
@click.option("-n", "--n", "n", type=int, required=True)
@click.option("--rate", type=float, default=None)
@click.option("-K", "--messages", "K", type=int, default=None, help="Message count (gv, constant-type).")
@click.option("--code-distance", type=int, default=1, show_default=True, help="Minimum Hamming distance (linear, gv).")
@click.option("--delta", type=float, default=0.1, show_default=True, help="Constant-type: pairwise distance >= 2 delta.")
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--type", "type_", default=None, help="Constant-type composition, comma separated, over the effective alphabet.")
@output_option
@click.pass_context
def codebook(ctx, channel, family, params, kind, n, rate, K, code_distance, delta, epsilon, type_, output):
    """Generate a codebook file."""
    rng = np.random.default_rng(ctx.obj["seed"])
    if kind == "linear":
        if rate is None:
            raise click.UsageError("linear codes need --rate")
        cb = coding.linear_codebook(n, rate, code_distance)
    elif kind == "gv":
        cb = coding.gv_codebook(n, rate, code_distance, rng, K=K)
    else:
        if type_ is None:
            raise click.UsageError("constant-type codes need --type")
        P = [float(v) for v in type_.split(",")]
        symbols = ("0", "1")
        if channel or family:
            symbols = tuple(build_common_structure(_channel(channel, family, params)).u_symbols)
        cb = coding.constant_type_codebook(n, rate or 0.0, P, delta, epsilon, rng, symbols, K=K)
    _dump({**cb.to_dict(), "config": _config(ctx)}, output)


@cli.command()
@channel_options
@code_options
@click.option("--decoder", type=click.Choice(["erasure", "naive", "general", "shared"]), default="erasure", show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--ell", type=int, default=None)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--attacks", default="default", show_default=True, help="'default', 'none' or a list like boundary:3,hybrid:32,mixing.")
@click.option("--estimator", type=click.Choice(["plain", "conditional"]), default="plain", show_default=True)
@click.option("--exact", is_flag=True, help="Exact enumeration instead of Monte Carlo (small n).")
@click.option("--exhaustive", is_flag=True, help="With --exact: maximize eta over every input vector.")
@click.option("--curve", is_flag=True, help="Emit an error curve over --n-grid as CSV.")
@click.option("--n-grid", default="64,128,256", show_default=True)
@click.option("--scheme", type=click.Choice(["erasure", "shared"]), default="erasure", show_default=True)
@click.option("--relaxed", is_flag=True, help="Shared curve: drop the code-distance requirement (diagnostic).")
@output_option
@plot_option
@click.pass_context
def simulate(ctx, channel, family, params, codebook_path, n, rate, code_distance, decoder, delta, epsilon, ell, trials, attacks,
             estimator, exact, exhaustive, curve, n_grid, scheme, relaxed, output, plot):
    """Estimate lambda, eta and P_e, or compute them exactly."""
    seed, threads = ctx.obj["seed"], ctx.obj["threads"]
    ch = _channel(channel, family, params)
    if curve:
        if rate is None:
            raise click.UsageError("--curve needs --rate")
        grid = [int(v) for v in n_grid.split(",")]
        if scheme == "shared":
            if family != "independent-bec":
                raise click.UsageError("the shared-randomness curve runs on --family independent-bec")
            res = simulation.shared_rand_error_curve(_parse_params(params)["q"], rate, delta, grid, trials, seed, relaxed, threads=threads)
        else:
            res = simulation.erasure_error_curve(ch, rate, delta, grid, trials, seed, estimator, attacks != "none", threads)
        rows = [{"n": r.n, "lambda_hat": r.lambda_hat, "eta_hat": r.eta_hat, "p_e_hat": r.p_e_hat, "ci": r.ci} for r in res.rows]
        config = {**_config(ctx), "slopes": {"p_e": res.slope_p_e, "lambda": res.slope_lambda, "eta": res.slope_eta}}
        _csv(rows, ["n", "lambda_hat", "eta_hat", "p_e_hat", "ci"], "error-curve", config, output)
        if plot:
            from .plotting import plot_error_curve

            plot_error_curve(rows, plot, title=f"{scheme} scheme")
        return
    cs = build_common_structure(ch)
    cb = _codebook(codebook_path, n, rate, code_distance, delta)
    dec = _decoder(decoder, cb, cs, delta, epsilon, ell)
    menu = _menu(attacks, cb.n, delta, cb.K)
    if exact:
        inputs = "all" if exhaustive else [a for a in menu if a.strategy != "boundary"]
        rep = simulation.exact_error(ch, cb, dec, inputs, structure=cs)
    else:
        rep = simulation.estimate_error(ch, cb, dec, trials, seed, menu, None, estimator, cs, threads)
    _dump({"config": _config(ctx), "codebook": {"n": cb.n, "K": cb.K, "rate": cb.rate}, "result": rep.to_dict()}, output)


@cli.command()
@channel_options
@code_options
@click.option("--strategy", type=click.Choice(["mixing", "boundary", "hybrid"]), required=True)
@click.option("--flips", type=int, default=None, help="Boundary: flipped coordinates (default floor(n delta) - 1).")
@click.option("-k", "--k", "k", type=int, default=None, help="Hybrid: prefix length taken from the second codeword.")
@click.option("-m", "--message", "m", type=int, default=0, show_default=True)
@click.option("--mhat", type=int, default=1, show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--count", type=int, default=1, show_default=True, help="Attacked vectors to emit.")
@click.option("--simulate", "run", is_flag=True, help="Estimate eta for this attack instead of emitting vectors.")
@click.option("--decoder", type=click.Choice(["erasure", "naive", "general", "shared"]), default="erasure", show_default=True)
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@output_option
@click.pass_context
def attack(ctx, channel, family, params, codebook_path, n, rate, code_distance, strategy, flips, k, m, mhat, delta, count, run,
           decoder, epsilon, trials, output):
    """Emit attacked input vectors or feed one attack into simulation."""
    seed = ctx.obj["seed"]
    ch = _channel(channel, family, params)
    cs = build_common_structure(ch)
    cb = _codebook(codebook_path, n, rate, code_distance, delta)
    p = {"m": m}
    if strategy == "boundary":
        p["flips"] = flips if flips is not None else adversary.boundary_flips(cb.n, delta)
    elif strategy == "hybrid":
        p.update(k=k if k is not None else cb.n // 2, mhat=mhat)
    att = adversary.Attack(strategy, strategy, p)
    if run:
        dec = _decoder(decoder, cb, cs, delta, epsilon, None)
        est = simulation.run_attack_trials(ch, cb, dec, [att], trials, seed, cs, ctx.obj["threads"])[strategy]
        _dump({"config": _config(ctx), "attack": att.to_dict(), "result": est.to_dict()}, output)
        return
    ctx_a = adversary.AttackContext(cb, cs)
    xs = att.sample(ctx_a, count, np.random.default_rng(seed))
    sym = ch.x_alphabet
    vectors = [" ".join(sym[int(i)] for i in row) if any(len(s) > 1 for s in sym) else "".join(sym[int(i)] for i in row) for row in xs]
    _dump({"config": _config(ctx), "attack": att.to_dict(), "vectors": vectors}, output)


@cli.command()
@channel_options
@click.option("-n", "--n", "n", type=int, default=1, show_default=True)
@click.option("-K", "--messages", "K", type=int, default=2, show_default=True)
@click.option("--budget", type=int, default=simulation.ORACLE_BUDGET, show_default=True)
@output_option
@click.pass_context
def oracle(ctx, channel, family, params, n, K, budget, output):
    """Exact minimum of max(lambda, eta) over all codes and decoder pairs."""
    ch = _channel(channel, family, params)
    res = simulation.exhaustive_min_error(ch, n, K, budget)
    _dump({"config": _config(ctx), "result": res.to_dict()}, output)


@cli.command()
@click.argument("saved", type=click.Path(exists=True, dir_okay=False))
@output_option
@click.pass_context
def replay(ctx, saved, output):
    """Re-run the command recorded in a JSON output or a CSV header."""
    text = Path(saved).read_text(encoding="utf-8")
    config = None
    if text.lstrip().startswith("{"):
        config = json.loads(text).get("config")
    else:
        for line in text.splitlines():
            if line.startswith("# config="):
                config = json.loads(line[len("# config="):])
    if not config or config.get("command") not in cli.commands:
        raise click.UsageError(f"{saved} has no replayable config")
    cmd = cli.commands[config["command"]]
    ctx.obj["seed"] = config["seed"]
    params = dict(config["params"])
    for p in cmd.params:
        if p.name in ("output", "plot"):
            params[p.name] = output if p.name == "output" else None
        elif p.multiple and p.name in params:
            params[p.name] = tuple(params[p.name])
    sub = click.Context(cmd, info_name=cmd.name, parent=ctx, obj=ctx.obj)
    sub.params = params
    with sub:
        sub.invoke(cmd.callback, **params)


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name=TOOL, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 2
    except ConsensusLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
