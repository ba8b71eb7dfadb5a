"""Result files: CSV tables, JSON summaries, manifests, and plot scripts.

Every number is written with 17 significant digits so a rerun with the same
config and seed produces byte-identical tables regardless of worker count.
Timestamps appear only in the manifest.  Plots are emitted as data plus a
small generated script (log-log axes with a reference slope line) instead of
binary images.
"""

import csv
import hashlib
import json
from datetime import datetime, timezone


def fmt17(x):
    return format(float(x), ".17g")


def _bool_text(flag):
    if flag is None:
        return ""
    return "true" if flag else "false"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_survival_csv(path, curve):
    """Columns: t,m,n,p_tilde,halfwidth (m = tail count, n = sample total)."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["t", "m", "n", "p_tilde", "halfwidth"])
        for k in range(len(curve)):
            w.writerow(
                [
                    fmt17(curve.grid[k]),
                    int(curve.counts[k]),
                    curve.n_total,
                    fmt17(curve.p_tilde[k]),
                    fmt17(curve.halfwidth[k]),
                ]
            )


def write_scan_csv(path, encodings, estimates):
    """Columns: state_encoding,gamma,gamma_sd,argmax_t,stabilized."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["state_encoding", "gamma", "gamma_sd", "argmax_t",
                    "stabilized"])
        for enc, est in zip(encodings, estimates):
            w.writerow(
                [
                    enc,
                    fmt17(est.value),
                    fmt17(est.std_dev),
                    fmt17(est.argmax_time),
                    _bool_text(est.stabilized),
                ]
            )


def write_coupling_csv(path, report):
    """Columns: n,tv_exact,p_T_gt_n,halfwidth."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["n", "tv_exact", "p_T_gt_n", "halfwidth"])
        for i, n in enumerate(report.n_grid):
            w.writerow(
                [
                    int(n),
                    fmt17(report.tv[i]),
                    fmt17(report.p_tail[i]),
                    fmt17(report.halfwidth[i]),
                ]
            )


def write_series_csv(path, series):
    """Columns: t,mean,stderr."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["t", "mean", "stderr"])
        for i in range(len(series.times)):
            w.writerow(
                [
                    fmt17(series.times[i]),
                    fmt17(series.means[i]),
                    fmt17(series.stderrs[i]),
                ]
            )


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def gamma_dict(est):
    return {
        "value": est.value,
        "argmax_time": est.argmax_time,
        "stabilized": est.stabilized,
        "std_dev": est.std_dev,
        "checkpoints": list(est.checkpoints),
        "n_batches_used": est.n_batches_used,
    }


def fit_dict(fit):
    if fit is None:
        return None
    return {
        "beta": fit.beta,
        "stderr": fit.stderr,
        "fit_range": list(fit.fit_range),
        "n_points": fit.n_points,
    }


# ---- manifest -----------------------------------------------------------------


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir, file_names, experiment, master_seed, workers,
                   n_trajectories, config=None):
    """manifest.json listing every artifact with its content hash.

    The created_utc timestamp and the worker count are the only fields that
    may differ between reruns of the same (config, seed); comparisons should
    go through manifest_fingerprint.
    """
    files = {}
    for name in sorted(file_names):
        files[name] = {"sha256": sha256_file(out_dir / name)}
    manifest = {
        "version": 1,
        "experiment": experiment,
        "master_seed": int(master_seed),
        "workers": int(workers),
        "n_trajectories": int(n_trajectories),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "files": files,
    }
    if config is not None:
        manifest["config"] = config
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path


def manifest_fingerprint(path):
    """Manifest content minus the run-environment fields (timestamp, workers)."""
    with open(path) as fh:
        manifest = json.load(fh)
    manifest.pop("created_utc", None)
    manifest.pop("workers", None)
    return manifest


# ---- plot scripts ---------------------------------------------------------------

_TAIL_PLOT = '''#!/usr/bin/env python3
"""Log-log survival plot with a reference slope line."""
import csv

import matplotlib.pyplot as plt

ts, ps = [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        t, p = float(row["t"]), float(row["p_tilde"])
        if p > 0.0:
            ts.append(t)
            ps.append(p)
plt.loglog(ts, ps, ".", label="tail estimate")
anchor = ps[len(ps) // 2] * ts[len(ps) // 2] ** {beta}
plt.loglog(ts, [anchor * t ** -{beta} for t in ts],
           label="slope -{beta} reference")
plt.xlabel("t")
plt.ylabel("P[tau > t]")
plt.legend()
plt.savefig({png_name!r}, dpi=150)
'''

_SWEEP_PLOT = '''#!/usr/bin/env python3
"""Gamma against the swept points, with error bars."""
import csv

import matplotlib.pyplot as plt

labels, gs, sds = [], [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        labels.append(row["state_encoding"])
        gs.append(float(row["gamma"]))
        sds.append(1.96 * float(row["gamma_sd"]))
xs = range(len(gs))
plt.errorbar(xs, gs, yerr=sds, fmt="o")
plt.xticks(xs, labels, rotation=45, ha="right", fontsize=7)
plt.ylabel("gamma")
plt.tight_layout()
plt.savefig({png_name!r}, dpi=150)
'''

_SERIES_PLOT = '''#!/usr/bin/env python3
"""Observable mean against time, with error bars."""
import csv

import matplotlib.pyplot as plt

ts, ms, es = [], [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        ts.append(float(row["t"]))
        ms.append(float(row["mean"]))
        es.append(float(row["stderr"]))
plt.errorbar(ts, ms, yerr=es, fmt=".-")
plt.xlabel("t")
plt.ylabel("mean")
plt.savefig({png_name!r}, dpi=150)
'''

_COUPLING_PLOT = '''#!/usr/bin/env python3
"""Exact TV against the simulated coupling bound."""
import csv

import matplotlib.pyplot as plt

ns, tv, bound = [], [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        ns.append(int(row["n"]))
        tv.append(float(row["tv_exact"]))
        bound.append(2.0 * (float(row["p_T_gt_n"]) + float(row["halfwidth"])))
plt.semilogy(ns, tv, label="exact TV")
plt.semilogy(ns, bound, label="2 (p~ + halfwidth)")
plt.xlabel("n")
plt.legend()
plt.savefig({png_name!r}, dpi=150)
'''


def tail_plot_script(csv_name, beta, png_name="survival.png"):
    return _TAIL_PLOT.format(csv_name=csv_name, beta=fmt17(beta),
                             png_name=png_name)


def sweep_plot_script(csv_name, png_name="sweep.png"):
    return _SWEEP_PLOT.format(csv_name=csv_name, png_name=png_name)


def series_plot_script(csv_name, png_name="series.png"):
    return _SERIES_PLOT.format(csv_name=csv_name, png_name=png_name)


def coupling_plot_script(csv_name, png_name="coupling.png"):
    return _COUPLING_PLOT.format(csv_name=csv_name, png_name=png_name)


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)
