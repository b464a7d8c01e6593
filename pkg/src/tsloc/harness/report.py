"""Plot-ready tables and figures for a Monte Carlo run."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_trials_csv(trials, path) -> Path:
    """One row per (trial, node): position error, prior error, convergence, exclusions."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "node", "position_error_m", "prior_error_m", "converged", "excluded", "failed", "error"])
        for t in sorted(trials, key=lambda t: t.trial):
            if t.failed:
                w.writerow([t.trial, "", "", "", "", "", 1, t.error])
                continue
            for node in sorted(t.position_error):
                prior = t.prior_error.get(node)
                w.writerow([
                    t.trial,
                    node,
                    repr(t.position_error[node]),
                    "" if prior is None else repr(prior),
                    int(t.converged.get(node, False)),
                    ";".join(t.excluded.get(node, [])),
                    0,
                    "",
                ])
    return path


def plot_error_cdf(trials, scenario, path) -> Path:
    """Empirical CDF of per-node position errors next to the helpers' prior errors."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from tsloc.scene import NodeRole

    ok = [t for t in trials if not t.failed]
    fig, ax = plt.subplots(figsize=(6, 4))
    for node in scenario.scene.ids:
        e = np.sort([t.position_error[node] for t in ok if node in t.position_error])
        if e.size == 0:
            continue
        style = "-" if scenario.scene.role(node) is NodeRole.BLIND else ":"
        ax.step(e, np.arange(1, e.size + 1) / e.size, style, where="post", label=node)
    prior = np.sort([e for t in ok for e in t.prior_error.values()])
    if prior.size:
        ax.step(prior, np.arange(1, prior.size + 1) / prior.size, "k--", where="post", label="helper prior")
    ax.set_xlabel("position error [m]")
    ax.set_ylabel("empirical CDF")
    ax.set_title(scenario.name or "scenario")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def plot_scene(scenario, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scene = scenario.scene
    markers = {
        "FixedTransmitOnly": "^",
        "FixedReceiveOnly": "v",
        "FixedTransceiver": "D",
        "MobileGnss": "o",
        "Blind": "*",
    }
    fig, ax = plt.subplots(figsize=(5, 5))
    for a, b in (tuple(sorted(link)) for link in scene.nlos_links):
        pa, pb = scene.position(a), scene.position(b)
        ax.plot([pa[0], pb[0]], [pa[1], pb[1]], "r--", lw=1)
    for node in scene.ids:
        p = scene.position(node)
        role = scene.role(node).value
        ax.plot(p[0], p[1], markers[role], ms=10 if role == "Blind" else 7)
        ax.annotate(node, p[:2], textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def write_report(directory, scenario, trials, summary) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary.to_json(), encoding="utf-8")
    files = [out / "summary.json", write_trials_csv(trials, out / "trials.csv")]
    files.append(plot_error_cdf(trials, scenario, out / "error_cdf.png"))
    if scenario.scene.dimension == 2:
        files.append(plot_scene(scenario, out / "scene.png"))
    return files
