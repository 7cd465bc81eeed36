"""
Command-line runner.

Usage::

    degspde COMMAND [--config PATH] [--set key=value ...] [--out DIR] [--threads K]

Commands: simulate, ergodicity, irreducibility, bel, lemma-suite,
potential-table.  Every run writes its CSV files, the resolved
configuration, the seed lineage, the code version and a verdict block
(``verdict.txt`` plus the machine-readable ``failures.json``) into the output
directory.  The exit status is 0 iff every asserted property holds, 1 if
one fails and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .checkpoint import checkpoint_save
from .config import ConfigError, RunConfig, build_field, parse_config
from .experiments.bel import Observable, bel_estimate
from .experiments.ensemble import default_threads, map_chunks
from .experiments.ergodicity import ergodicity_run
from .experiments.irreducibility import irreducibility_run
from .experiments.monitors import Functionals, MonitorObserver, MonitorSeries, energy_monitor, lyapunov_check
from .experiments.separation import separation_stats
from .io import Verdict, fmt, write_csv, write_metadata
from .potentials import lemma_property_suite, potential_table_rows
from .solver import Stepper, simulate
from .spectral import build_basis

COMMANDS = ("simulate", "ergodicity", "irreducibility", "bel", "lemma-suite", "potential-table")


def _basis(cfg: RunConfig):
    return build_basis(cfg["bc"], cfg["L"], cfg["N"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_simulate(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    params = cfg.model_params()
    sc = cfg.solver_config()
    st = Stepper(params, sc)
    mon = cfg.monitor_config()
    x0 = build_field(cfg["x0"], st.basis)

    def run(chunk):
        obs = MonitorObserver(Functionals(st, mon), mon.stride, sc.dt, include_initial=np.broadcast_to(x0, (chunk.shape[0], x0.shape[0])))
        rec = simulate(x0, params, sc, chunk, stepper=st, observer=obs, store=False)
        return obs.series(), rec

    parts = map_chunks(run, np.arange(cfg["trajectories"]), chunk_size=cfg["chunk_size"], threads=threads)
    series = MonitorSeries.concat([p[0] for p in parts])
    recs = [p[1] for p in parts]
    stats = energy_monitor(series, mon, params, stepper=st, x0=x0)
    names = stats.names
    cols = ["time"] + [f"{n}_{s}" for n in names for s in ("mean", "q10", "q50", "q90")]
    rows = []
    for i, t in enumerate(stats.times):
        row = [t]
        for n in names:
            row += [stats.mean[n][i], *stats.quantiles[n][i]]
        rows.append(row)
    write_csv(out / "monitors.csv", cols, rows, "ensemble mean and 10/50/90% quantiles of each functional per sample time")
    sep = separation_stats(recs, params, final_states=np.concatenate([r.final for r in recs]), stepper=st)
    traj = np.concatenate([r.trajectories for r in recs])
    write_csv(
        out / "separation.csv",
        ["trajectory", "sup_abs", "layer"],
        zip(traj, 1.0 - sep.layers, sep.layers),
        "per-trajectory sup over steps and dealiased nodes of |X| and layer 1 - sup",
    )
    write_csv(
        out / "exceedance.csv",
        ["layer", "p_exceed", "wilson_low", "wilson_high", "p_exceed_final"],
        [(L, sep.exceedance[L], *sep.wilson[L], sep.final_exceedance.get(L, math.nan)) for L in sep.ladder],
        "probability that sup|X| exceeds 1 - layer (over the path and at the final time)",
    )
    final = np.concatenate([r.final for r in recs])
    checkpoint_save(out / "final.ckpt", params, sc, recs[0].step_index, traj, final)
    v = Verdict("simulate")
    v.check("finite statistics", all(np.all(np.isfinite(m)) for m in stats.mean.values()), f"{len(names)} functionals, {stats.n_trajectories} trajectories")
    v.check("excursion budget", sep.within_budget, f"max sup|X| = {fmt(sep.max_sup)} < {fmt(sep.excursion_budget)}")
    lineage = dict(recs[0].lineage)
    lineage["trajectories"] = [0, int(cfg["trajectories"]) - 1]
    return v, lineage


def run_ergodicity(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    params = cfg.model_params()
    sc = cfg.solver_config()
    basis = _basis(cfg)
    x1 = build_field(cfg["erg_x1"], basis)
    x2 = build_field(cfg["erg_x2"], basis)
    seed2 = None if cfg["erg_seed2"] < 0 else cfg["erg_seed2"]
    rep = ergodicity_run(
        x1, x2, params, sc,
        burn_in=cfg["erg_burn_in"], horizon=cfg["erg_horizons"], n_per_chain=cfg["erg_per_chain"],
        coupling=cfg["erg_coupling"], monitor=cfg.monitor_config(), chunk_size=cfg["chunk_size"],
        threads=threads, seed2=seed2,
    )
    obs = rep.observables
    write_csv(
        out / "ks.csv",
        ["horizon"] + [f"ks_{o}" for o in obs] + ["null_band"],
        [[T] + [rep.ks[o][i] for o in obs] + [rep.null_band] for i, T in enumerate(rep.horizons)],
        f"two-sample KS distance of time-averaged laws after burn-in {fmt(rep.burn_in)}; null band at level 0.01 from the trajectory count",
    )
    rows = []
    for name, arr in rep.budget_values.items():
        for c in range(arr.shape[0]):
            for i, T in enumerate(rep.horizons):
                rows.append([name, c + 1, T, arr[c, i], rep.stats[c].budget])
    write_csv(
        out / "budgets.csv",
        ["functional", "chain", "horizon", "value", "initial_budget"],
        rows,
        "sup_t of the ensemble mean up to the horizon (time average for gradient-weighted terms); initial_budget = 1 + ||Psi_gamma(x)||_L1",
    )
    write_csv(
        out / "budget_slopes.csv",
        ["functional", "log_slope_per_doubling"],
        sorted(rep.budget_slopes.items()),
        "largest least-squares slope of log(value) against log2(horizon) over the two chains",
    )
    v = Verdict("ergodicity")
    tol = cfg["erg_ks_max"]
    for o in obs:
        k = rep.ks[o]
        v.check(f"KS {o} decreasing over final two doublings", rep.ks_decreasing(o), "KS = " + ", ".join(fmt(x) for x in k))
        v.check(f"KS {o} final < {fmt(tol)}", k[-1] < tol, f"KS({fmt(rep.horizons[-1])}) = {fmt(k[-1])}")
    smax = cfg["erg_slope_max"]
    for name, s in sorted(rep.budget_slopes.items()):
        v.check(f"budget {name} log slope < {fmt(smax)}", s < smax, f"slope = {fmt(s)}")
    # deterministic Lyapunov check from both starts
    det = Stepper(params, replace(sc, noise_mode="off", horizon=1.0))
    ok, worst = lyapunov_check(det, np.stack([x1, x2]), int(round(1.0 / sc.dt)))
    v.check("deterministic energy non-increasing at every step", ok, f"largest relative increase = {fmt(worst)}")
    return v, rep.lineage


def run_irreducibility(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    params = cfg.model_params()
    basis = _basis(cfg)
    x = build_field(cfg["x0"], basis)
    a = build_field(cfg["irr_target"], basis)
    mode = None if cfg["irr_test_mode"] == "none" else cfg["irr_test_mode"]
    rep = irreducibility_run(
        x, a, cfg["irr_t"], cfg["irr_tau"], cfg["irr_gains"], cfg["irr_r"], params, cfg["irr_samples"],
        n_modes=cfg["N"], dt_free=cfg["irr_dt_free"], dt_drift=cfg["irr_dt"], seed=cfg["seed"],
        chunk_size=cfg["chunk_size"], threads=threads, test_mode=mode,
    )
    gains = rep.gains
    write_csv(
        out / "decay.csv",
        ["time"] + [f"mean_sq_M{fmt(M)}" for M in gains],
        [[t] + [rep.mean_sq[M][i] for M in gains] for i, t in enumerate(rep.times)],
        "ensemble mean of ||Z(s) - a~||_H^2 on [tau, t]",
    )
    rows = []
    for M in gains:
        f = rep.rates.get(M)
        rows.append(
            [M, f.rate if f else math.nan, f.expected if f else math.nan, f.rel_error if f else math.nan,
             f.plateau if f else math.nan, rep.hit_successes[M], rep.n_samples, rep.hit_probability[M], *rep.wilson[M]]
        )
    write_csv(
        out / "summary.csv",
        ["gain", "rate", "expected_rate", "rel_error", "plateau", "hits", "n", "p_hit", "wilson_low", "wilson_high"],
        rows,
        f"fitted amplitude decay rate vs M/(t - tau); hits: ||Z(t) - a||_V2delta < {fmt(rep.r)}; ||a - a~||_V2delta = {fmt(rep.target_error)}",
    )
    v = Verdict("irreducibility")
    tol = cfg["irr_rate_tol"]
    for M in gains:
        if M <= 0:
            continue
        f = rep.rates[M]
        v.check(f"rate M={fmt(M)} within {fmt(tol)}", f.rel_error < tol, f"rate {fmt(f.rate)} vs {fmt(f.expected)} (rel {fmt(f.rel_error)})")
        if mode is None:
            lo = rep.wilson[M][0]
            v.check(f"hitting probability M={fmt(M)} Wilson lower bound > 0", lo > 0, f"p = {fmt(rep.hit_probability[M])}, Wilson [{fmt(lo)}, {fmt(rep.wilson[M][1])}]")
    return v, rep.lineage


def run_bel(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    params = cfg.model_params()
    basis = _basis(cfg)
    x = build_field(cfg["x0"], basis)
    h = build_field(cfg["bel_h"], basis)
    phi = Observable.parse(cfg["bel_observable"])
    rep, samples = bel_estimate(
        x, h, phi, cfg["bel_t"], params, cfg["bel_samples"], n_modes=cfg["N"], dt=cfg["bel_dt"], eta=cfg["bel_eta"],
        seed=cfg["seed"], drift_mode=cfg["drift_mode"], noise_mode=cfg["noise_mode"], chunk_size=cfg["bel_chunk"], threads=threads,
    )
    write_csv(
        out / "samples.csv",
        ["sample", "bel", "fd", "accepted"],
        zip(range(samples["bel"].shape[0]), samples["bel"], samples["fd"], samples["accepted"]),
        f"per-sample estimator phi(X(t)) I/t and paired central difference with eta = {fmt(rep.fd_stepsize)}",
    )
    fields = [
        ("observable", phi.label), ("bel_estimate", rep.bel_estimate), ("bel_stderr", rep.bel_stderr),
        ("fd_estimate", rep.fd_estimate), ("fd_stderr", rep.fd_stderr), ("fd_stepsize", rep.fd_stepsize),
        ("n_samples", rep.n_samples), ("n_rejected", rep.n_rejected), ("z_score", rep.z_score), ("diff_stderr", rep.diff_stderr),
        ("analytic", rep.analytic if rep.analytic is not None else math.nan),
    ]
    write_csv(out / "report.csv", ["quantity", "value"], fields, "derivative estimates and their agreement")
    v = Verdict("bel")
    v.check("|BEL - FD| <= 3 combined stderr", abs(rep.z_score) <= 3.0, f"z = {fmt(rep.z_score)}")
    v.check("rejection rate < 1%", rep.rejection_rate < 0.01, f"{rep.n_rejected} of {rep.n_samples + rep.n_rejected}")
    if rep.analytic is not None:
        a = rep.analytic
        v.check("BEL within 3 stderr of analytic", abs(rep.bel_estimate - a) <= 3.0 * rep.bel_stderr, f"{fmt(rep.bel_estimate)} vs {fmt(a)} (stderr {fmt(rep.bel_stderr)})")
        # the paired difference of a linear observable is deterministic: allow rounding
        fd_tol = max(3.0 * rep.fd_stderr, 1e-9 * max(1.0, abs(a)))
        v.check("FD within 3 stderr of analytic", abs(rep.fd_estimate - a) <= fd_tol, f"{fmt(rep.fd_estimate)} vs {fmt(a)} (tolerance {fmt(fd_tol)})")
    return v, rep.lineage


def run_lemma_suite(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    items = lemma_property_suite(epsilons=cfg["lemma_eps"], exponents=cfg["lemma_exponents"])
    write_csv(
        out / "lemma.csv",
        ["item", "exponents", "epsilon", "lower", "upper", "passed", "detail"],
        [(it.item, "/".join(fmt(e) for e in it.exponents), it.epsilon, it.lower, it.upper, it.passed, it.detail) for it in items],
        "measured bounds or empirical constants per property",
    )
    v = Verdict("lemma-suite")
    for it in items:
        v.check(f"({it.item}) exponents {it.exponents} eps {fmt(it.epsilon)}", it.passed, f"{it.detail}: {fmt(it.lower)}, {fmt(it.upper)}")
    return v, {}


def run_potential_table(cfg: RunConfig, out: Path, threads: int) -> tuple[Verdict, dict]:
    rmax = cfg["table_rmax"]
    r = np.linspace(-rmax, rmax, cfg["table_points"])
    rows = potential_table_rows(cfg["table_exponent"], cfg["epsilon"], r)
    write_csv(
        out / "potential_table.csv",
        ["r", "m", "psi", "dpsi", "d2psi"],
        rows,
        f"regularised mobility and potential, exponent {fmt(cfg['table_exponent'])}, eps {fmt(cfg['epsilon'])}",
    )
    v = Verdict("potential-table")
    v.check("finite values", bool(np.all(np.isfinite(rows))), f"{rows.shape[0]} rows")
    v.check("m * psi'' = 1", float(np.max(np.abs(rows[:, 1] * rows[:, 4] - 1.0))) < 1e-12, f"max deviation {fmt(float(np.max(np.abs(rows[:, 1] * rows[:, 4] - 1.0))))}")
    return v, {}


RUNNERS = {
    "simulate": run_simulate,
    "ergodicity": run_ergodicity,
    "irreducibility": run_irreducibility,
    "bel": run_bel,
    "lemma-suite": run_lemma_suite,
    "potential-table": run_potential_table,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degspde", description="Simulation and verification runs for the degenerate stochastic phase-field model.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a key (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out/COMMAND)")
    p.add_argument("--threads", type=int, default=None, metavar="K", help="worker threads (default: available CPUs)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(command: str, cfg: RunConfig, out, threads: Optional[int] = None) -> int:
    """Run ``command`` and write its outputs to ``out``; returns the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    threads = default_threads() if threads is None else max(1, int(threads))
    verdict, lineage = RUNNERS[command](cfg, out, threads)
    write_metadata(out, cfg.resolved_text(), {"command": command, **lineage})
    verdict.write(out)
    sys.stdout.write(verdict.text())
    return 0 if verdict.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            cfg = parse_config(args.config, args.overrides)
        except (ConfigError, OSError) as exc:
            sys.stderr.write(f"config error: {exc}\n")
            return 2
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    out = args.out or str(Path("out") / args.command)
    sys.stdout.write(f"degspde {__version__} {args.command} -> {out}\n")
    sys.stdout.write(cfg.resolved_text())
    return run(args.command, cfg, out, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
