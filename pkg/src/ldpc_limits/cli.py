"""Batch experiment driver.

    ldpc-limits thresholds --l 3 4 --r 3 4 5 6 7 8 9 10
    ldpc-limits sweep --l 3 --r 6 --decoder lgalb --eps 0.03 --n 4096 16384 --seeds 50
    ldpc-limits witness --eps 0.03 --n 10000 --iters 10 --seeds 20
    ldpc-limits rprocess --r 6 --eps 0.05 --delta 0.0909090909 --S0 50 100 200
    ldpc-limits fkg --n 6 8 10 --trials 100
    ldpc-limits expansion --n 12 --l 3 --r 6 --alpha 0.25 --gamma 0.6 --seeds 5

Every run is determined by its configuration and ``--master-seed``; trial k
draws from streams derived from (master seed, k), so results do not depend
on ``--workers``.  CSV is the canonical output; ``--format json`` writes the
same rows as a JSON list.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numpy as np

from . import _seeding
from .de import QuantizedDE, find_threshold, galb, lgalb, witness_de_init, witness_de_step
from .decoders import DecoderSpec, run_decoder, sample_noise
from .errors import BudgetExceeded, DomainError, NumericError, ParameterError
from .fkg import fkg_check, random_monotone_table
from .graph import ExpansionSpec, alpha_max, check_expander, sample_graph, shannon_threshold
from .marking import build_witness
from .rprocess import bd_tail, fit_internal_tail, greedy_batch

SUBCOMMANDS = ("thresholds", "sweep", "witness", "rprocess", "fkg", "expansion")
Z95 = 1.959963984540054


@dataclass
class ExperimentConfig:
    subcommand: str
    l: list = field(default_factory=lambda: [3])
    r: list = field(default_factory=lambda: [6])
    decoder: list = field(default_factory=lambda: ["galb", "lgalb"])
    channel: str = "bsc"
    eps: list = field(default_factory=lambda: [0.03])
    n: list = field(default_factory=lambda: [4096])
    iters: int = 200
    seeds: int = 10
    trials: int = 1000
    tol: float = 1e-6
    window: int = 50
    master_seed: int = 0
    workers: int = 1
    delta: float = 1.0 / 11.0
    alpha: float = 0.25
    gamma: float = 0.6
    S0: list = field(default_factory=lambda: [50, 100, 200, 400])
    c: float | None = None
    mode: str = "tail"
    llr_bound: float | None = None
    out: str | None = None
    format: str = "csv"

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ParameterError(f"unknown subcommand {self.subcommand!r}")
        if self.format not in ("csv", "json"):
            raise ParameterError("format must be csv or json")
        if self.channel not in ("bsc", "bec"):
            raise ParameterError("channel must be bsc or bec")
        for e in self.eps:
            if not 0.0 <= e <= 1.0:
                raise ParameterError(f"eps {e} outside [0, 1]")
        if self.seeds < 1 or self.trials < 1 or self.iters < 1 or self.workers < 1:
            raise ParameterError("seeds, trials, iters and workers must be positive")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        clean = [{k: (_fmt(v) if isinstance(v, (np.generic,)) else v) for k, v in row.items()} for row in rows]
        return json.dumps(clean, indent=1, default=float) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _ci(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    mean = float(a.mean())
    half = Z95 * float(a.std(ddof=1)) / math.sqrt(a.size) if a.size > 1 else float("nan")
    return mean, half


def _map(fn, tasks, workers: int):
    if workers == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# subcommands


def cmd_thresholds(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for l in cfg.l:
        for r in cfg.r:
            rate = 1.0 - l / r
            if rate < 0:
                continue
            eps_sha = shannon_threshold(rate)
            rows.append(dict(l=l, r=r, rate=rate, column="sha", value=eps_sha, lo=eps_sha, hi=eps_sha, status="ok"))
            for dec in cfg.decoder:
                try:
                    if dec == "galb":
                        handle = galb(l, r)
                    elif dec == "lgalb":
                        handle = lgalb(l, r)
                    elif dec.startswith(("ms(", "lms(")):
                        spec = DecoderSpec.parse(dec)
                        handle = QuantizedDE(l, r, int(spec.M), spec.kind)
                    else:
                        raise ParameterError(dec)
                except ParameterError:
                    rows.append(dict(l=l, r=r, rate=rate, column=dec, value=None, lo=None, hi=None, status="unsupported"))
                    continue
                res = find_threshold(handle, tol=cfg.tol)
                rows.append(dict(l=l, r=r, rate=rate, column=dec, value=res.value, lo=res.lo, hi=res.hi, status="ok"))
    return rows


def _sweep_task(task):
    cfg, n, eps, k = task
    l, r = cfg.l[0], cfg.r[0]
    spec = DecoderSpec.parse(cfg.decoder[0], cfg.llr_bound)
    trial_seed = _seeding.derive_seed(cfg.master_seed, n, int(round(eps * 1e9)), k)
    g = sample_graph(n, l, r, _seeding.derive_seed(trial_seed, _seeding.GRAPH))
    noise = sample_noise(n, spec.channel, eps, _seeding.derive_seed(trial_seed, _seeding.NOISE))
    tr = run_decoder(g, noise, spec, cfg.iters, seed=_seeding.derive_seed(trial_seed, _seeding.TIES))
    return k, trial_seed, tr.ber, tr.bler, tr.bad_edge_fraction


def sweep_runs(cfg: ExperimentConfig) -> list[dict]:
    """One summary per (n, eps, seed index) with trailing-window extremes."""
    tasks = [(cfg, n, eps, k) for n in cfg.n for eps in cfg.eps for k in range(cfg.seeds)]
    results = _map(_sweep_task, tasks, cfg.workers)
    out = []
    for (_, n, eps, _), (k, trial_seed, ber, bler, frac) in zip(tasks, results):
        win = ber[-min(cfg.window, ber.size) :]
        out.append(dict(n=n, eps=eps, k=k, seed=trial_seed, ber=ber, bler=bler, frac=frac, win_max=float(win.max()), win_min=float(win.min())))
    return out


def cmd_sweep(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    runs = sweep_runs(cfg)
    l, r, dec = cfg.l[0], cfg.r[0], cfg.decoder[0]
    trace = []
    for run in runs:
        for t in range(cfg.iters):
            trace.append(
                dict(
                    seed=run["seed"],
                    n=run["n"],
                    l=l,
                    r=r,
                    decoder=dec,
                    eps=run["eps"],
                    iteration=t + 1,
                    ber=float(run["ber"][t]),
                    bler=float(run["bler"][t]),
                    bad_edge_fraction=float(run["frac"][t]),
                )
            )
    summary = []
    for n in cfg.n:
        for eps in cfg.eps:
            sel = [x for x in runs if x["n"] == n and x["eps"] == eps]
            hi_m, hi_h = _ci([x["win_max"] for x in sel])
            lo_m, lo_h = _ci([x["win_min"] for x in sel])
            summary.append(
                dict(n=n, eps=eps, l=l, r=r, decoder=dec, seeds=len(sel), window=cfg.window,
                     limsup_ber=hi_m, limsup_ci95=hi_h, liminf_ber=lo_m, liminf_ci95=lo_h)
            )
    return trace, summary


def _witness_task(task):
    cfg, n, eps, k = task
    l, r = cfg.l[0], cfg.r[0]
    trial_seed = _seeding.derive_seed(cfg.master_seed, n, int(round(eps * 1e9)), k)
    g = sample_graph(n, l, r, _seeding.derive_seed(trial_seed, _seeding.GRAPH))
    noise = sample_noise(n, "bsc", eps, _seeding.derive_seed(trial_seed, _seeding.NOISE))
    tr = run_decoder(g, noise, DecoderSpec("lgalb"), max(1, cfg.iters - 1), record=True)
    return [build_witness(g, noise, d, tr).size for d in range(1, cfg.iters + 1)]


def cmd_witness(cfg: ExperimentConfig) -> list[dict]:
    if cfg.l[0] != 3:
        raise ParameterError("witness studies need l = 3")
    rows = []
    for n in cfg.n:
        for eps in cfg.eps:
            tasks = [(cfg, n, eps, k) for k in range(cfg.seeds)]
            sizes = np.array(_map(_witness_task, tasks, cfg.workers), dtype=float)
            s = witness_de_init(eps)
            for d in range(1, cfg.iters + 1):
                mean, half = _ci(sizes[:, d - 1] / n)
                rows.append(dict(n=n, eps=eps, depth=d, seeds=cfg.seeds, mean_size_per_n=mean, ci95=half,
                                 de_envelope=cfg.l[0] * s.p_der))
                s = witness_de_step(s, eps, cfg.r[0])
    return rows


def cmd_rprocess(cfg: ExperimentConfig) -> list[dict]:
    r, eps = cfg.r[0], cfg.eps[0]
    delta = Fraction(cfg.delta).limit_denominator(10**6)
    rows = []
    if cfg.mode == "bd":
        grid = [(a, p, mu, beta) for a in (3, 5) for (p, mu) in ((0.3, 0.6), (0.5, 0.3), (0.5, 0.45)) for beta in (3.0, 4.0)]
        for i, (a, p, mu, beta) in enumerate(grid):
            res = bd_tail(a, p, mu, beta, cfg.trials, _seeding.derive_seed(cfg.master_seed, i))
            rows.append(dict(a=a, p=p, mu=mu, beta=beta, horizon=res.b, exact=res.exact, empirical=res.empirical,
                             ci95=Z95 * res.stderr, chernoff=res.chernoff))
        return rows
    fit = fit_internal_tail(cfg.S0, eps, delta, r, cfg.trials, cfg.master_seed, cfg.c)
    for k, (s0, prob) in enumerate(zip(fit.S0, fit.probs)):
        b = greedy_batch(s0, eps, delta, r, cfg.trials, seed=cfg.master_seed + k)
        mean, half = _ci(b.internal / s0)
        rows.append(dict(S0=s0, r=r, eps=eps, delta=float(delta), trials=cfg.trials, mean_internal_per_S0=mean,
                         mean_ci95=half, c=fit.c, tail_prob=prob,
                         tail_ci95=Z95 * math.sqrt(prob * (1 - prob) / cfg.trials), fitted_slope=fit.slope))
    return rows


def cmd_fkg(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for n in cfg.n:
        if n > 10:
            raise ParameterError("fkg sweeps are limited to n <= 10")
        for i, eps in enumerate(cfg.eps):
            rng = _seeding.rng_for(cfg.master_seed, n, i)
            gaps = []
            for _ in range(cfg.trials):
                up = bool(rng.random() < 0.5)
                f = random_monotone_table(n, rng, increasing=up)
                g = random_monotone_table(n, rng, increasing=up)
                res = fkg_check(n, eps, f, g)
                gaps.append(res.e_fg - res.e_f * res.e_g)
            gaps = np.array(gaps)
            rows.append(dict(n=n, eps=eps, pairs=cfg.trials, violations=int(np.sum(gaps < -1e-12)),
                             min_gap=float(gaps.min()), max_gap=float(gaps.max())))
    return rows


def cmd_expansion(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    spec = ExpansionSpec(cfg.alpha, cfg.gamma)
    for l in cfg.l:
        for r in cfg.r:
            try:
                amax = alpha_max(l, r, cfg.gamma)
            except (DomainError, NumericError):
                amax = None
            for n in cfg.n:
                verdicts = []
                for k in range(cfg.seeds):
                    g = sample_graph(n, l, r, _seeding.derive_seed(cfg.master_seed, l, r, n, k))
                    try:
                        verdicts.append(check_expander(g, spec))
                    except BudgetExceeded as exc:
                        raise ParameterError(str(exc)) from exc
                frac = float(np.mean(verdicts))
                half = Z95 * math.sqrt(frac * (1 - frac) / len(verdicts))
                rows.append(dict(l=l, r=r, n=n, alpha=cfg.alpha, gamma=cfg.gamma, seeds=cfg.seeds,
                                 expander_fraction=frac, ci95=half, alpha_max=amax))
    return rows


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldpc-limits", description=__doc__.split("\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON config; its keys override command-line flags")
    p.add_argument("--l", type=int, nargs="+")
    p.add_argument("--r", type=int, nargs="+")
    p.add_argument("--decoder", nargs="+")
    p.add_argument("--channel", choices=("bsc", "bec"))
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--iters", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--S0", type=int, nargs="+")
    p.add_argument("--c", type=float)
    p.add_argument("--mode", choices=("tail", "bd"))
    p.add_argument("--llr-bound", dest="llr_bound", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    return p


def config_from_args(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("config",)}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            from_file = json.load(fh)
        given.update(from_file)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(given) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**given)
    cfg.validate()
    return cfg


def run(cfg: ExperimentConfig) -> dict[str, str]:
    """Execute a configuration; returns {suffix: rendered text}."""
    cfg.validate()
    if cfg.subcommand == "sweep":
        trace, summary = cmd_sweep(cfg)
        return {"": render(trace, cfg.format), "_summary": render(summary, cfg.format)}
    fn = {
        "thresholds": cmd_thresholds,
        "witness": cmd_witness,
        "rprocess": cmd_rprocess,
        "fkg": cmd_fkg,
        "expansion": cmd_expansion,
    }[cfg.subcommand]
    return {"": render(fn(cfg), cfg.format)}


def _with_suffix(path: str, suffix: str) -> str:
    if not suffix:
        return path
    stem, dot, ext = path.rpartition(".")
    return f"{stem}{suffix}.{ext}" if dot else path + suffix


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        outputs = run(cfg)
    except (ParameterError, DomainError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for suffix, text in outputs.items():
        if cfg.out:
            with open(_with_suffix(cfg.out, suffix), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            if suffix:
                sys.stdout.write(f"# {suffix.lstrip('_')}\n")
            sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
