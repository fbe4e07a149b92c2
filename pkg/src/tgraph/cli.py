"""Command-line entry point: scene generation, ground-truth graph export,
training, evaluation, and run comparison."""
from __future__ import annotations

import csv
import json
import os
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from .errors import DegenerateAxesError, TrainingDivergedError
from .graph import build_graph, normalize_graph
from .metrics import MetricReport, evaluate
from .regressor import TrainConfig, baseline_predict, load_checkpoint, save_checkpoint, train_joint
from .synth import GENERATORS, Scenario, load_scene, save_scene

SCENARIO_NAMES = [s.value for s in Scenario]
REPRESENTATION_CHOICES = ["relative-t", "pair-t"]
TRAIN_CHOICES = REPRESENTATION_CHOICES + ["none"]


def worker_count() -> int:
    """Parallelism cap from TGRAPH_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("TGRAPH_THREADS", "1")))
    except ValueError:
        return 1


def apply_config_file(ctx, config_path):
    """Fill parameters from a JSON config file; explicit flags win."""
    if config_path is None:
        return
    with open(config_path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise click.UsageError("config file must hold a JSON object")
    known = {p.name for p in ctx.command.params}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in known:
            raise click.UsageError(f"unknown config key {key!r}")
        source = ctx.get_parameter_source(name)
        if source in (click.core.ParameterSource.DEFAULT,
                      click.core.ParameterSource.DEFAULT_MAP):
            ctx.params[name] = value


def config_option(fn):
    return click.option("--config", "config_path", type=click.Path(exists=True),
                        default=None, help="JSON config file; flags override.")(fn)


@click.group()
def main():
    """Pairwise-translation graph supervision toolkit."""


@main.command()
@click.option("--scenario", type=click.Choice(SCENARIO_NAMES), required=True)
@click.option("--n", type=int, default=6, show_default=True, help="Cameras per scene (2-8).")
@click.option("--count", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed of the first scene; scene k uses seed+k.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--radius", type=float, default=2.0, show_default=True)
@click.option("--look-jitter-deg", type=float, default=0.0, show_default=True)
@click.option("--radial-jitter", type=float, default=0.0, show_default=True,
              help="Relative spread of camera radii around --radius.")
@click.option("--spacing", type=float, default=1.0, show_default=True)
@click.option("--axis-jitter-deg", type=float, default=0.0, show_default=True)
@click.option("--parallel-fraction", type=float, default=0.25, show_default=True)
@click.option("--d-f", type=int, default=16, show_default=True)
@click.option("--noise-sigma", type=float, default=0.05, show_default=True)
@config_option
@click.pass_context
def gen(ctx, scenario, n, count, seed, out_dir, radius, look_jitter_deg,
        radial_jitter, spacing, axis_jitter_deg, parallel_fraction, d_f,
        noise_sigma, config_path):
    """Write deterministic synthetic scene JSON files."""
    apply_config_file(ctx, config_path)
    p = ctx.params
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    scenario = Scenario(p["scenario"])
    common = {"d_f": p["d_f"], "noise_sigma": p["noise_sigma"]}
    if scenario is Scenario.CENTER_FACING:
        kwargs = {"radius": p["radius"], "look_jitter_deg": p["look_jitter_deg"],
                  "radial_jitter": p["radial_jitter"], **common}
    elif scenario is Scenario.PARALLEL:
        kwargs = {"spacing": p["spacing"], "axis_jitter_deg": p["axis_jitter_deg"], **common}
    else:
        kwargs = {"parallel_fraction": p["parallel_fraction"], "radius": p["radius"],
                  "look_jitter_deg": p["look_jitter_deg"],
                  "radial_jitter": p["radial_jitter"], "spacing": p["spacing"],
                  "axis_jitter_deg": p["axis_jitter_deg"], **common}

    def make(k):
        scene = GENERATORS[scenario](p["n"], seed=p["seed"] + k, **kwargs)
        save_scene(scene, out / f"scene_{p['seed'] + k:08d}.json")

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(make, range(p["count"])))
    else:
        for k in range(p["count"]):
            make(k)
    click.echo(f"wrote {p['count']} scene(s) to {out}")


def _scene_paths(scenes_dir):
    # graph files written beside scenes carry extra suffixes; skip them
    paths = sorted(p for p in Path(scenes_dir).glob("scene_*.json")
                   if p.suffixes == [".json"])
    if not paths:
        raise click.UsageError(f"no scene files in {scenes_dir}")
    return paths


@main.command("gt-graph")
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--representation", type=click.Choice(REPRESENTATION_CHOICES), required=True)
@config_option
@click.pass_context
def gt_graph(ctx, scenes_dir, representation, config_path):
    """Build and normalize ground-truth graphs beside each scene file."""
    apply_config_file(ctx, config_path)
    representation = ctx.params["representation"]
    skipped = 0
    written = 0
    for path in _scene_paths(ctx.params["scenes_dir"]):
        scene = load_scene(path)
        try:
            graph = normalize_graph(build_graph(scene.poses, representation))
        except DegenerateAxesError as exc:
            click.echo(f"skipped {path.name}: {exc}", err=True)
            skipped += 1
            continue
        out = path.with_suffix(f".{representation}.graph.json")
        tmp = out.with_suffix(".tmp")
        tmp.write_text(json.dumps(graph.to_dict(), sort_keys=True))
        os.replace(tmp, out)
        written += 1
    click.echo(f"wrote {written} graph(s), skipped {skipped}")
    if skipped:
        sys.exit(1)


@main.command()
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--representation", type=click.Choice(TRAIN_CHOICES), required=True,
              help="'none' trains the ablation baseline without the graph branch.")
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--weight-decay", type=float, default=0.0, show_default=True)
@click.option("--patience", type=int, default=20, show_default=True)
@click.option("--val-fraction", type=float, default=0.125, show_default=True)
@click.option("--out", "checkpoint_path", type=click.Path(dir_okay=False), required=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), required=True)
@config_option
@click.pass_context
def train(ctx, scenes_dir, representation, epochs, lr, seed, weight_decay,
          patience, val_fraction, checkpoint_path, log_path, config_path):
    """Train the joint model and write checkpoint + CSV log."""
    apply_config_file(ctx, config_path)
    p = ctx.params
    dataset = [load_scene(path) for path in _scene_paths(p["scenes_dir"])]
    config = TrainConfig(representation=p["representation"], epochs=p["epochs"],
                         lr=p["lr"], seed=p["seed"], weight_decay=p["weight_decay"],
                         patience=p["patience"], val_fraction=p["val_fraction"])
    try:
        model, log = train_joint(dataset, config)
    except TrainingDivergedError as exc:
        click.echo(f"training diverged: {exc}", err=True)
        sys.exit(2)
    save_checkpoint(model, p["checkpoint_path"])
    tmp = f"{p['log_path']}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "l_ori", "l_tgraph",
                                                "l_full", "val_metric"])
        writer.writeheader()
        writer.writerows(log)
    os.replace(tmp, p["log_path"])
    click.echo(f"trained {len(log)} epoch(s); final l_full {log[-1]['l_full']:.6f}")


@main.command("eval")
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=1, show_default=True,
              help="Sampling trials per viewpoint count (averaged).")
@click.option("--per-n", type=int, default=None,
              help="Scenes sampled per viewpoint count per trial (default: all).")
@config_option
@click.pass_context
def eval_cmd(ctx, scenes_dir, checkpoint_path, out_path, seed, trials, per_n, config_path):
    """Evaluate a checkpoint: one metrics row per viewpoint count.

    Only the encoder and baseline head are loaded; the graph branch never
    participates in inference.
    """
    apply_config_file(ctx, config_path)
    p = ctx.params
    model = load_checkpoint(p["checkpoint_path"], with_tgraph_head=False)
    by_n = defaultdict(list)
    for path in _scene_paths(p["scenes_dir"]):
        scene = load_scene(path)
        by_n[len(scene.poses)].append(scene)

    rows = []
    for n in sorted(by_n):
        scenes = by_n[n]
        trial_means = []
        for trial in range(p["trials"]):
            rng = np.random.default_rng(p["seed"] + trial)
            if p["per_n"] is not None and p["per_n"] < len(scenes):
                chosen = [scenes[i] for i in rng.choice(len(scenes), p["per_n"], replace=False)]
            else:
                chosen = scenes
            reports = [evaluate(baseline_predict(model, s.features), s.poses)
                       for s in chosen]
            trial_means.append([np.mean([r.rotation_acc_15 for r in reports]),
                                np.mean([r.center_acc_02 for r in reports]),
                                np.mean([r.translation_acc_02 for r in reports])])
        rot, center, trans = np.mean(trial_means, axis=0)
        rows.append(MetricReport(n_views=n, rotation_acc_15=float(rot),
                                 center_acc_02=float(center),
                                 translation_acc_02=float(trans)))

    tmp = f"{p['out_path']}.tmp"
    with open(tmp, "w") as fh:
        fh.write(MetricReport.CSV_HEADER + "\n")
        for report in rows:
            fh.write(report.to_csv_row(model.representation, p["seed"]) + "\n")
    os.replace(tmp, p["out_path"])
    click.echo(f"wrote metrics for n in {sorted(by_n)} to {p['out_path']}")


METRIC_COLUMNS = ("rotation_acc_15", "center_acc_02", "translation_acc_02")


@main.command()
@click.option("--run", "runs", multiple=True, required=True,
              help="label=path/to/metrics.csv; repeat for each run.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def compare(runs, out_path):
    """Join evaluation CSVs into one per-metric, per-viewpoint table."""
    if len(runs) < 2:
        raise click.UsageError("need at least two --run entries")
    parsed = []
    for entry in runs:
        if "=" not in entry:
            raise click.UsageError(f"--run must be label=path, got {entry!r}")
        label, path = entry.split("=", 1)
        if not Path(path).is_file():
            raise click.UsageError(f"missing metrics file {path}")
        per_n = defaultdict(list)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                per_n[int(row["n_views"])].append(
                    {m: float(row[m]) for m in METRIC_COLUMNS})
        means = {n: {m: float(np.mean([r[m] for r in rows_n])) for m in METRIC_COLUMNS}
                 for n, rows_n in per_n.items()}
        parsed.append((label, means))

    n_values = sorted(parsed[0][1])
    for label, means in parsed[1:]:
        if sorted(means) != n_values:
            raise click.UsageError(
                f"run {label!r} covers n={sorted(means)}, expected {n_values}")

    lines = []
    out_rows = []
    for metric in METRIC_COLUMNS:
        lines.append(metric)
        header = "  run".ljust(18) + "".join(f"n={n}".rjust(9) for n in n_values)
        lines.append(header)
        best = {n: max(means[n][metric] for _, means in parsed)
                for n in n_values if not (metric == "center_acc_02" and n == 2)}
        for label, means in parsed:
            cells = []
            row = {"metric": metric, "run": label}
            for n in n_values:
                if metric == "center_acc_02" and n == 2:
                    cells.append("-".rjust(9))
                    row[f"n={n}"] = ""
                    continue
                value = means[n][metric]
                mark = "*" if value == best[n] else " "
                cells.append(f"{value:.3f}{mark}".rjust(9))
                row[f"n={n}"] = f"{value:.6f}"
            lines.append(f"  {label:<16}" + "".join(cells))
            out_rows.append(row)
        lines.append("")

    table = "\n".join(lines)
    click.echo(table)
    tmp = f"{out_path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["metric", "run"] + [f"n={n}" for n in n_values])
        writer.writeheader()
        writer.writerows(out_rows)
    os.replace(tmp, out_path)


if __name__ == "__main__":
    main()
