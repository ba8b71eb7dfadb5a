"""Config-driven experiment runner.

Each subcommand validates one JSON config, builds its inputs, runs the
experiment through the farm, and writes a deterministic artifact set plus a
manifest listing every file with its content hash.  Exit codes: 0 success,
2 validation failure (bad config, bad referenced inputs), 3 runtime failure
(partial outputs are removed).
"""

import argparse
import json
import sys
from pathlib import Path

from . import artifacts, couplab, farm, scan, stationary
from .config import (
    ConfigError,
    build_initial,
    build_model,
    build_refset,
    build_times,
    validate_config,
)

SUBCOMMAND_KIND = {
    "tail": "tail",
    "sweep": "sweep",
    "scan": "grid-scan",
    "confirm": "confirm",
    "burnin": "burn-in",
    "stabilize": "stabilization",
    "correlate": "correlation",
    "couplab": "couplab",
}


def _tail_config(cfg):
    return scan.TailConfig(
        h=cfg["h"],
        t_max=cfg["t_max"],
        beta=cfg["beta"],
        n_samples=cfg["n_samples"],
        m_min=cfg["m_min"],
        points_per_decade=cfg["points_per_decade"],
        rel_change=cfg["rel_change"],
        n_batches=cfg["n_batches"],
        chunk_size=cfg.get("chunk_size"),
    )


def _emit(written, out_dir, name, writer):
    written.append(name)
    writer(out_dir / name)


# ---- build phase (errors here are validation failures) -------------------------


def _build_tail(cfg, seed):
    model = build_model(cfg)
    refset = build_refset(cfg, model)
    return {
        "model": model,
        "refset": refset,
        "initial": build_initial(cfg, model),
        "tc": _tail_config(cfg),
    }


def _build_sweep(cfg, seed):
    job = _build_tail(cfg, seed)
    job["base_state"] = job["model"].decode_state(cfg["base_state"])
    # resolve swept states now so bad coordinates fail as validation
    for v in cfg["values"]:
        state = job["model"].coordinate_state(
            job["base_state"], cfg["coordinate"], v
        )
        if cfg["require_in_refset"] and not job["refset"].contains(state):
            raise ValueError(
                f"values: swept state at {cfg['coordinate']}={v} "
                "lies outside the refset"
            )
    return job


def _build_scan(cfg, seed):
    job = _build_tail(cfg, seed)
    model, spec = job["model"], cfg["lattice"]
    if "per_axis" in spec:
        job["lattice"] = scan.see_lattice(model, job["refset"],
                                          spec["per_axis"])
    elif "s_values" in spec:
        job["lattice"] = scan.rhm_lattice(
            model, spec["s_values"], spec["k_values"], spec["x_values"]
        )
    else:
        job["lattice"] = scan.Lattice(
            states=tuple(model.decode_state(s) for s in spec["states"])
        )
    for state in job["lattice"].states:
        if not job["refset"].contains(state):
            raise ValueError(
                f"lattice: state {model.encode_state(state)} "
                "lies outside the refset"
            )
    return job


def _build_confirm(cfg, seed):
    job = _build_tail(cfg, seed)
    job["candidate"] = job["model"].decode_state(cfg["candidate"])
    if not job["refset"].contains(job["candidate"]):
        raise ValueError("candidate: lies outside the refset")
    return job


def _build_burnin(cfg, seed):
    return {"model": build_model(cfg)}


def _build_stabilize(cfg, seed):
    model = build_model(cfg)
    obs = stationary.ObservableSpec.resolve(model, cfg["observable"])
    return {"model": model, "obs": obs, "times": build_times(cfg["times"])}


def _build_correlate(cfg, seed):
    model = build_model(cfg)
    ensemble = stationary.read_ensemble(cfg["ensemble"])
    if ensemble.params != model.as_dict():
        raise ValueError("ensemble: built for different model parameters")
    return {
        "model": model,
        "ensemble": ensemble,
        "xi": stationary.ObservableSpec.resolve(model, cfg["xi"]),
        "eta": stationary.ObservableSpec.resolve(model, cfg["eta"]),
        "times": build_times(cfg["times"]),
    }


def _build_couplab(cfg, seed):
    if "chain" in cfg.data:
        chain = couplab.chain_from_json(json.dumps(cfg["chain"]))
    else:
        chain = couplab.chain_from_json(Path(cfg["chain_path"]).read_text())
    mu = chain.distribution(cfg["mu"])
    nu = chain.distribution(cfg["nu"])
    return {"chain": chain, "mu": mu, "nu": nu}


# ---- execute phase --------------------------------------------------------------


def _exec_tail(job, cfg, seed, workers, out_dir, written):
    tc = job["tc"]
    run = farm.run_tail(
        job["model"], job["refset"], job["initial"], tc.h, tc.t_max, tc.beta,
        tc.n_samples, seed, workers=workers, chunk_size=tc.chunk_size,
        m_min=tc.m_min, points_per_decade=tc.points_per_decade,
        rel_change=tc.rel_change, n_batches=tc.n_batches,
    )
    _emit(written, out_dir, "survival.csv",
          lambda p: artifacts.write_survival_csv(p, run.curve))
    summary = {
        "beta_reference": tc.beta,
        "fit": artifacts.fit_dict(run.fit),
        "gamma": artifacts.gamma_dict(run.gamma),
        "n_samples": tc.n_samples,
    }
    _emit(written, out_dir, "fit.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_survival.py",
          lambda p: artifacts.write_text(
              p, artifacts.tail_plot_script("survival.csv", tc.beta)))
    return tc.n_samples


def _exec_sweep(job, cfg, seed, workers, out_dir, written):
    model, tc = job["model"], job["tc"]
    estimates = scan.sweep_1d(
        model, job["refset"], job["base_state"], cfg["coordinate"],
        cfg["values"], tc, seed, workers=workers,
        require_in_refset=cfg["require_in_refset"],
    )
    encodings = [
        model.encode_state(
            model.coordinate_state(job["base_state"], cfg["coordinate"], v)
        )
        for v in cfg["values"]
    ]
    _emit(written, out_dir, "sweep.csv",
          lambda p: artifacts.write_scan_csv(p, encodings, estimates))
    summary = {
        "coordinate": cfg["coordinate"],
        "values": list(cfg["values"]),
        "verdict": scan.monotone_verdict(
            [e.value for e in estimates], [e.std_dev for e in estimates]
        ),
        "gamma": [artifacts.gamma_dict(e) for e in estimates],
    }
    _emit(written, out_dir, "sweep.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_sweep.py",
          lambda p: artifacts.write_text(
              p, artifacts.sweep_plot_script("sweep.csv")))
    return tc.n_samples * len(cfg["values"])


def _exec_scan(job, cfg, seed, workers, out_dir, written):
    model, tc, lattice = job["model"], job["tc"], job["lattice"]
    report = scan.grid_scan(model, job["refset"], lattice, tc, seed,
                            workers=workers)
    encodings = [model.encode_state(s) for s, _ in report.points]
    _emit(written, out_dir, "scan.csv",
          lambda p: artifacts.write_scan_csv(
              p, encodings, [e for _, e in report.points]))
    summary = {
        "candidate_max": model.encode_state(report.candidate_max),
        "candidate_index": report.candidate_index,
        "separated": report.separated,
        "sweeps": report.sweeps,
        "confirmed": report.confirmed,
        "updated_beta": report.updated_beta,
    }
    _emit(written, out_dir, "scan.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_scan.py",
          lambda p: artifacts.write_text(
              p, artifacts.sweep_plot_script("scan.csv", "scan.png")))
    return tc.n_samples * len(lattice.states)


def _exec_confirm(job, cfg, seed, workers, out_dir, written):
    model, tc = job["model"], job["tc"]
    counts = farm.run_passage_counts(
        model, job["refset"], farm.FixedInitial(job["candidate"]), tc.h,
        tc.t_max, tc.n_samples, seed, workers=workers,
        chunk_size=tc.chunk_size, points_per_decade=tc.points_per_decade,
    )
    report = scan.confirm_from_data(counts, tc.beta, tc.h, tc.m_min,
                                    tc.rel_change, tc.n_batches)
    _emit(written, out_dir, "survival.csv",
          lambda p: artifacts.write_survival_csv(p, counts.curve()))
    summary = {
        "candidate": cfg["candidate"],
        "beta_reference": report.reference_beta,
        "updated_beta": report.updated_beta,
        "unstable": report.unstable,
        "fit": artifacts.fit_dict(report.fit),
        "gamma": artifacts.gamma_dict(report.gamma),
        "n_samples": tc.n_samples,
    }
    _emit(written, out_dir, "confirm.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_survival.py",
          lambda p: artifacts.write_text(
              p, artifacts.tail_plot_script("survival.csv", tc.beta)))
    return tc.n_samples


def _exec_burnin(job, cfg, seed, workers, out_dir, written):
    ensemble = stationary.burn_in(
        job["model"], None, cfg["burn_time"], cfg["ensemble_size"], seed,
        workers=workers,
    )
    _emit(written, out_dir, "ensemble.txt",
          lambda p: stationary.write_ensemble(ensemble, p))
    return cfg["ensemble_size"]


def _exec_stabilize(job, cfg, seed, workers, out_dir, written):
    series = stationary.stabilization_series(
        job["model"], None, job["obs"], job["times"], cfg["m_samples"], seed,
        workers=workers,
    )
    _emit(written, out_dir, "series.csv",
          lambda p: artifacts.write_series_csv(p, series))
    summary = {
        "observable": cfg["observable"],
        "m_samples": cfg["m_samples"],
        "flat_tail": series.flat_tail(),
    }
    _emit(written, out_dir, "series.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_series.py",
          lambda p: artifacts.write_text(
              p, artifacts.series_plot_script("series.csv")))
    return cfg["m_samples"]


def _exec_correlate(job, cfg, seed, workers, out_dir, written):
    series = stationary.correlation_decay(
        job["model"], job["ensemble"], job["xi"], job["eta"], job["times"],
        cfg["m_samples"], seed, workers=workers, n_batches=cfg["n_batches"],
        max_time=cfg["max_time"],
    )
    _emit(written, out_dir, "correlation.csv",
          lambda p: artifacts.write_series_csv(p, series))
    cov = stationary.ensemble_covariance(
        job["model"], job["ensemble"], job["xi"], job["eta"]
    )
    summary = {
        "xi": cfg["xi"],
        "eta": cfg["eta"],
        "m_samples": cfg["m_samples"],
        "ensemble_covariance": cov,
    }
    _emit(written, out_dir, "correlation.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_correlation.py",
          lambda p: artifacts.write_text(
              p, artifacts.series_plot_script("correlation.csv",
                                              "correlation.png")))
    return cfg["m_samples"]


def _exec_couplab(job, cfg, seed, workers, out_dir, written):
    chain = job["chain"]
    report = couplab.coupling_inequality_check(
        chain, job["mu"], job["nu"], cfg["n_max"], cfg["n_samples"], seed,
        workers=workers,
    )
    _emit(written, out_dir, "coupling.csv",
          lambda p: artifacts.write_coupling_csv(p, report))
    dominate = couplab.dominate_check(chain)
    summary = {
        "eta": chain.eta,
        "theta": [float(v) for v in chain.theta],
        "ok": report.ok,
        "violations": list(report.violations),
        "n_samples": cfg["n_samples"],
        "n_max": cfg["n_max"],
        "dominate": None
        if dominate is None
        else {"state": dominate[0], "delta": float(dominate[1])},
    }
    _emit(written, out_dir, "coupling.json",
          lambda p: artifacts.write_json(p, summary))
    _emit(written, out_dir, "plot_coupling.py",
          lambda p: artifacts.write_text(
              p, artifacts.coupling_plot_script("coupling.csv")))
    return cfg["n_samples"]


_BUILDERS = {
    "tail": (_build_tail, _exec_tail),
    "sweep": (_build_sweep, _exec_sweep),
    "grid-scan": (_build_scan, _exec_scan),
    "confirm": (_build_confirm, _exec_confirm),
    "burn-in": (_build_burnin, _exec_burnin),
    "stabilization": (_build_stabilize, _exec_stabilize),
    "correlation": (_build_correlate, _exec_correlate),
    "couplab": (_build_couplab, _exec_couplab),
}


def run_experiment(config, seed=None, workers=None, out=None):
    """Run a validated config; returns the output directory.

    Raises ConfigError for input problems and lets runtime errors propagate
    after removing partial outputs.
    """
    seed = config.master_seed if seed is None else int(seed)
    workers = workers if workers is not None else config.workers
    out = out if out is not None else config.out
    if out is None:
        raise ConfigError(["out: no output directory (config `out` or --out)"])
    build, execute = _BUILDERS[config.kind]
    try:
        job = build(config, seed)
    except (ValueError, KeyError, OSError) as err:
        raise ConfigError([str(err)]) from err
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        n_traj = execute(job, config, seed, workers, out_dir, written)
        echo = dict(config.data)
        echo["master_seed"] = seed
        echo.pop("workers", None)
        echo.pop("out", None)
        artifacts.write_manifest(
            out_dir, written, config.kind, seed,
            farm.resolve_workers(workers), n_traj, config=echo,
        )
    except Exception:
        for name in written + ["manifest.json"]:
            path = out_dir / name
            if path.exists():
                path.unlink()
        raise
    return out_dir


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="polymix",
        description="Jump-process tail certification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KIND:
        p = sub.add_parser(name, help=f"run a {SUBCOMMAND_KIND[name]} config")
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default POLYMIX_WORKERS or 1)")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        config = validate_config(text)
        expected = SUBCOMMAND_KIND[args.command]
        if config.kind != expected:
            raise ConfigError(
                [f"kind: config is {config.kind!r}, command needs {expected!r}"]
            )
        out_dir = run_experiment(config, args.seed, args.workers, args.out)
    except ConfigError as err:
        for msg in err.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    print(out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
