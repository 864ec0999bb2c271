"""Seeded multi-run experiments: orchestration, aggregation, CSV and SVG output.

Every (arm, run) pair is an independent job whose seed is ``base_seed + run``.
The seed does not depend on the arm, so every arm sees the same seeds
(common random numbers) and reordering arms changes nothing.  Jobs may run
in a process pool; files are written by the parent once all jobs finish.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .mdp import MdpError, TabularMdp, build_riverswim, load_mdp
from .planner import RegretRecord, RunConfig, dp_ucbvi_run, ucbvi_hoeffding_baseline

log = logging.getLogger(__name__)

ARM_KINDS = ("ucbvi", "none", "central", "local")
CSV_HEADER = ("episode", "arm", "run", "regret", "cumulative_regret")
AGGREGATE_HEADER = ("episode", "arm", "runs", "mean_cumulative_regret", "stderr_cumulative_regret")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ArmSpec:
    label: str
    kind: str = "none"            # one of ARM_KINDS; "ucbvi" is the Hoeffding baseline
    epsilon: float = 1.0
    bonus_scale: float | None = None   # None -> the experiment-wide default
    e_override: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ARM_KINDS:
            raise SpecError(f"arm {self.label!r}: unknown kind {self.kind!r}; expected one of {ARM_KINDS}")
        if not self.label:
            raise SpecError("arm labels must be non-empty")
        if not self.epsilon > 0:
            raise SpecError(f"arm {self.label!r}: epsilon must be positive")
        if self.bonus_scale is not None and not self.bonus_scale > 0:
            raise SpecError(f"arm {self.label!r}: bonus_scale must be positive")
        if self.e_override is not None and self.e_override < 0:
            raise SpecError(f"arm {self.label!r}: E must be nonnegative")


@dataclass(frozen=True)
class ExperimentSpec:
    K: int
    arms: tuple[ArmSpec, ...]
    environment: str = "riverswim"     # builtin name or path to a JSON model
    H: int = 20                        # H and S only apply to the builtin environment
    S: int = 6
    runs: int = 1
    base_seed: int = 0
    checkpoint_stride: int | None = None
    output_dir: Path = Path("results")
    bonus_scale: float = 0.1
    beta: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.K < 1:
            raise SpecError(f"K must be >= 1, got {self.K}")
        if self.runs < 1:
            raise SpecError(f"runs must be >= 1, got {self.runs}")
        if not self.arms:
            raise SpecError("at least one arm is required")
        labels = [a.label for a in self.arms]
        if len(set(labels)) != len(labels):
            raise SpecError(f"arm labels must be unique, got {labels}")
        if self.checkpoint_stride is not None and self.checkpoint_stride < 1:
            raise SpecError("checkpoint_stride must be >= 1")
        if not self.bonus_scale > 0:
            raise SpecError("bonus_scale must be positive")
        if not 0 < self.beta < 1:
            raise SpecError("beta must lie in (0, 1)")

    @property
    def stride(self) -> int:
        return self.checkpoint_stride or max(1, self.K // 500)

    def checkpoints(self) -> np.ndarray:
        """1-based episode numbers reported in the aggregate; always ends at K."""
        pts = list(range(self.stride, self.K + 1, self.stride))
        if not pts or pts[-1] != self.K:
            pts.append(self.K)
        return np.array(pts)

    def build_env(self) -> TabularMdp:
        if self.environment == "riverswim":
            return build_riverswim(self.S, self.H)
        path = Path(self.environment)
        if not path.exists():
            raise SpecError(f"unknown environment {self.environment!r} (not a builtin or an existing file)")
        try:
            return load_mdp(path)
        except MdpError as err:
            raise SpecError(str(err)) from err

    def run_config(self, arm: ArmSpec, run: int) -> RunConfig:
        privatizer = "none" if arm.kind == "ucbvi" else arm.kind
        return RunConfig(K=self.K, privatizer=privatizer, epsilon=arm.epsilon, beta=self.beta,
                         bonus_scale=arm.bonus_scale or self.bonus_scale, seed=self.base_seed + run,
                         bonus="hoeffding" if arm.kind == "ucbvi" else "bernstein",
                         e_override=arm.e_override, label=arm.label)


def spec_from_json(doc: dict, output_dir: str | Path | None = None) -> ExperimentSpec:
    """Build a spec from a JSON document (``arms`` is a list of objects)."""
    try:
        arms = tuple(ArmSpec(**a) for a in doc["arms"])
        kw = {k: v for k, v in doc.items() if k != "arms"}
        if output_dir is not None:
            kw["output_dir"] = output_dir
        return ExperimentSpec(arms=arms, **kw)
    except KeyError as err:
        raise SpecError(f"spec is missing field {err}") from err
    except TypeError as err:
        raise SpecError(f"bad spec field: {err}") from err


@dataclass
class Aggregate:
    label: str
    episodes: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    runs: int


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: dict[str, list[RegretRecord]] = field(default_factory=dict)
    aggregates: list[Aggregate] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def _run_job(env: TabularMdp, arm: ArmSpec, cfg: RunConfig) -> RegretRecord:
    if arm.kind == "ucbvi":
        return ucbvi_hoeffding_baseline(env, cfg)
    return dp_ucbvi_run(env, cfg)


def _worker_count() -> int:
    raw = os.environ.get("DPRL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise SpecError(f"DPRL_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise SpecError(f"DPRL_THREADS must be >= 1, got {n}")
    return n


def aggregate(label: str, records: list[RegretRecord], checkpoints: np.ndarray) -> Aggregate:
    """Mean and standard error (over runs) of cumulative regret at the checkpoints."""
    cum = np.stack([r.cumulative[checkpoints - 1] for r in records])
    n = len(records)
    se = cum.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(cum.shape[1])
    return Aggregate(label, checkpoints, cum.mean(axis=0), se, n)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label)


def emit_csv(records: list[tuple[str, int, RegretRecord]], path: str | Path) -> None:
    """Per-episode regret rows for every (arm, run, record) triple."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for arm, run, rec in records:
            for k, (r, c) in enumerate(zip(rec.per_episode_regret, rec.cumulative), start=1):
                w.writerow((k, arm, run, _fmt(r), _fmt(c)))


def emit_aggregate_csv(aggregates: list[Aggregate], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for agg in aggregates:
            for ep, m, se in zip(agg.episodes, agg.mean, agg.stderr):
                w.writerow((int(ep), agg.label, agg.runs, _fmt(m), _fmt(se)))


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def emit_svg_chart(aggregates: list[Aggregate], path: str | Path, width: int = 800, height: int = 500) -> None:
    """Line chart of mean cumulative regret with shaded +-1 standard-error bands."""
    left, right, top, bottom = 80, 200, 30, 60
    pw, ph = width - left - right, height - top - bottom
    x_max = max((float(a.episodes[-1]) for a in aggregates), default=1.0) or 1.0
    y_max = max((float(np.max(a.mean + a.stderr)) for a in aggregates), default=0.0)
    y_max = y_max if y_max > 0 else 1.0

    def X(v):
        return left + pw * np.asarray(v, dtype=float) / x_max

    def Y(v):
        return top + ph * (1.0 - np.asarray(v, dtype=float) / y_max)

    def pts(xs, ys):
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(6):
        xv, yv = x_max * i / 5, y_max * i / 5
        out.append(f'<text x="{X(xv):.2f}" y="{top + ph + 18}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{Y(yv) + 4:.2f}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 15}" text-anchor="middle">episode</text>')
    out.append(f'<text x="20" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 20 {top + ph / 2})">cumulative regret</text>')

    for i, agg in enumerate(aggregates):
        color = _COLORS[i % len(_COLORS)]
        xs = X(agg.episodes)
        upper, lower = Y(agg.mean + agg.stderr), Y(np.maximum(agg.mean - agg.stderr, 0.0))
        band = pts(np.r_[xs, xs[::-1]], np.r_[upper, lower[::-1]])
        out.append(f'<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="mean" points="{pts(xs, Y(agg.mean))}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        ly = top + 20 * i + 10
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="3"/>')
        out.append(f'<text x="{left + pw + 45}" y="{ly + 4}">{escape(agg.label)}</text>')
    note_y = top + 20 * len(aggregates) + 10
    out.append(f'<text x="{left + pw + 15}" y="{note_y}" font-size="10">bands: mean ± 1 s.e.</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def run_experiment(spec: ExperimentSpec, write: bool = True) -> ExperimentReport:
    """Run every arm x run, aggregate, and (optionally) write CSV/SVG outputs."""
    env = spec.build_env()
    jobs = [(arm, run, spec.run_config(arm, run)) for arm in spec.arms for run in range(spec.runs)]

    if write:
        try:
            spec.output_dir.mkdir(parents=True, exist_ok=True)
            probe = spec.output_dir / ".write_test"
            probe.write_text("")
            probe.unlink()
        except OSError as err:
            raise OSError(f"output directory {spec.output_dir} is not writable: {err}") from err

    workers = min(_worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_job, env, arm, cfg) for arm, _, cfg in jobs]
            results = [f.result() for f in futures]
    else:
        results = []
        for arm, run, cfg in jobs:
            results.append(_run_job(env, arm, cfg))
            log.info("finished %s run %d: final cumulative regret %.4g",
                     arm.label, run, results[-1].cumulative[-1])

    report = ExperimentReport(spec)
    for (arm, _, _), rec in zip(jobs, results):
        report.records.setdefault(arm.label, []).append(rec)
    cps = spec.checkpoints()
    report.aggregates = [aggregate(a.label, report.records[a.label], cps) for a in spec.arms]

    if write:
        out = spec.output_dir
        for arm in spec.arms:
            for run, rec in enumerate(report.records[arm.label]):
                p = out / f"{_slug(arm.label)}_run{run}.csv"
                emit_csv([(arm.label, run, rec)], p)
                report.files.append(p)
        p = out / "aggregate.csv"
        emit_aggregate_csv(report.aggregates, p)
        report.files.append(p)
        p = out / "regret.svg"
        emit_svg_chart(report.aggregates, p)
        report.files.append(p)
        p = out / "spec.json"
        p.write_text(json.dumps(spec_to_json(spec), indent=2) + "\n")
        report.files.append(p)
    return report


def spec_to_json(spec: ExperimentSpec) -> dict:
    return {
        "environment": spec.environment, "K": spec.K, "H": spec.H, "S": spec.S,
        "runs": spec.runs, "base_seed": spec.base_seed, "checkpoint_stride": spec.checkpoint_stride,
        "bonus_scale": spec.bonus_scale, "beta": spec.beta,
        "arms": [{"label": a.label, "kind": a.kind, "epsilon": a.epsilon,
                  "bonus_scale": a.bonus_scale, "e_override": a.e_override} for a in spec.arms],
    }
