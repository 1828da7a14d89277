"""End-to-end experiment stages: fairness audit, impact simulation, tau sweep.

One JSON config plus the input files determines every output byte. Each
stage writes its artifacts into the output directory and a
``manifest.json`` listing the config hash, tool version and the sha256 of
every stable output; wall-clock numbers go to ``timings.json``, which the
manifest lists by name only so reruns stay byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    ALL_FEATURES,
    MUTABLE_PLUS_SENSITIVE,
    DataError,
    Population,
    SchemaError,
    load_csv,
    restrict_features,
    schema_from_dict,
    split,
    write_csv,
    generate_synthetic,
)
from .dynamics import feature_shift_report, simulate
from .effort import BENEFITS, EffortParams
from .fairness import (
    BOUNDED_EFFORT,
    THRESHOLD_REWARD,
    FairnessAudit,
    residual_differences,
)
from .models import (
    Predictor,
    evaluate,
    fit_constrained_linear,
    fit_linear,
    fit_mlp,
    fit_ridge,
    fit_tree,
    group_benefit_gap,
)
from .segregation import MetricContext, compare

MODEL_KINDS = ("linear", "ridge", "tree", "mlp", "constrained")
SEGREGATION_MEASURES = ("atkinson", "centralization", "aci", "ssi")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str
    features: str = ALL_FEATURES
    ridge_lambda: float = 0.0
    max_depth: int = 5
    tau: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise SchemaError(f"unknown model kind {self.kind!r}")
        if self.features not in (ALL_FEATURES, "mutable", MUTABLE_PLUS_SENSITIVE):
            raise SchemaError(f"unknown feature set {self.features!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path
    schema: Path
    train_fraction: float
    split_seed: int
    models: tuple
    effort: EffortParams
    benefit: str
    delta_points: int
    tau_grid: tuple
    sweep_features: str
    beta: float
    minority: str | None
    centralization_threshold: float | None
    connectivity_threshold: float
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw: dict, base_dir: Path) -> ExperimentConfig:
    try:
        seed = int(raw.get("seed", 0))
        split_cfg = raw.get("split", {})
        benefit = raw.get("benefit", "predicted")
        if benefit not in BENEFITS:
            raise SchemaError(f"unknown benefit {benefit!r}")
        effort_cfg = raw.get("effort", {})
        effort = EffortParams(
            alpha=float(effort_cfg.get("alpha", 1.0)),
            base_cost=effort_cfg.get("base_costs", effort_cfg.get("base_cost", 0.0)),
            categorical_cost=float(effort_cfg.get("categorical_cost", 0.5)),
            feature_weights=effort_cfg.get("feature_weights"),
        )
        models = []
        for md in raw.get("models", []):
            models.append(
                ModelSpec(
                    name=str(md["name"]),
                    kind=str(md["kind"]),
                    features=str(md.get("features", ALL_FEATURES)),
                    ridge_lambda=float(md.get("lambda", 0.0)),
                    max_depth=int(md.get("max_depth", 5)),
                    tau=float(md.get("tau", 0.0)),
                )
            )
        if len({m.name for m in models}) != len(models):
            raise SchemaError("model names must be unique")
        sweep = raw.get("sweep", {})
        thresh = raw.get("centralization_threshold")
        return ExperimentConfig(
            dataset=(base_dir / raw["dataset"]).resolve(),
            schema=(base_dir / raw["schema"]).resolve(),
            train_fraction=float(split_cfg.get("train_fraction", 0.7)),
            split_seed=int(split_cfg.get("seed", seed)),
            models=tuple(models),
            effort=effort,
            benefit=benefit,
            delta_points=int(raw.get("delta_grid_points", 20)),
            tau_grid=tuple(float(t) for t in sweep.get("tau_grid", [0.0, 0.5, 1.0, 2.0, 5.0])),
            sweep_features=str(sweep.get("features", ALL_FEATURES)),
            beta=float(raw.get("beta", 0.5)),
            minority=raw.get("minority"),
            centralization_threshold=None if thresh is None else float(thresh),
            connectivity_threshold=float(raw.get("connectivity_threshold", 1e-6)),
            seed=seed,
            raw=raw,
        )
    except KeyError as exc:
        raise SchemaError(f"config missing required field: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad config value: {exc}") from None


def fit_model(spec: ModelSpec, train: Population, config: ExperimentConfig) -> Predictor:
    pop = train
    if spec.features in ("mutable", MUTABLE_PLUS_SENSITIVE):
        pop = restrict_features(train, MUTABLE_PLUS_SENSITIVE)
    if spec.kind == "linear":
        return fit_linear(pop)
    if spec.kind == "ridge":
        return fit_ridge(pop, spec.ridge_lambda)
    if spec.kind == "tree":
        return fit_tree(pop, spec.max_depth)
    if spec.kind == "mlp":
        return fit_mlp(pop, seed=config.seed + 1)
    if spec.kind == "constrained":
        return fit_constrained_linear(
            pop, spec.tau, config.benefit, _minority(config, train)
        )
    raise SchemaError(f"unknown model kind {spec.kind!r}")


def _minority(config: ExperimentConfig, pop: Population) -> str:
    if config.minority is not None:
        if config.minority not in pop.group_names:
            raise DataError(f"minority group {config.minority!r} not in data")
        return config.minority
    return pop.smallest_group()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def _write_csv_rows(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class StageRunner:
    """Collects emitted files and timings for the manifest."""

    def __init__(self, out_dir: Path, config: ExperimentConfig, command: str):
        self.out_dir = out_dir
        self.config = config
        self.command = command
        self.stages: list[dict] = []
        self.timings: list[dict] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def run(self, name: str, fn) -> None:
        start = time.perf_counter()
        files = fn()
        self.timings.append({"stage": name, "seconds": time.perf_counter() - start})
        entries = []
        for f in files:
            digest = hashlib.sha256((self.out_dir / f).read_bytes()).hexdigest()
            entries.append({"path": f, "sha256": digest})
        self.stages.append({"stage": name, "files": entries})

    def finish(self) -> Path:
        tag = self.command.replace("-", "_")
        timings_name = f"timings_{tag}.json"
        manifest_name = f"manifest_{tag}.json"
        (self.out_dir / timings_name).write_text(_json_text(self.timings), encoding="utf-8")
        manifest = {
            "command": self.command,
            "config_sha256": self.config.config_hash(),
            "tool_version": __version__,
            "threads": os.environ.get("EFFORTSIM_THREADS", "1"),
            "stages": self.stages
            + [
                {
                    "stage": "bookkeeping",
                    "files": [
                        {"path": timings_name, "sha256": None},
                        {"path": manifest_name, "sha256": None},
                    ],
                }
            ],
        }
        path = self.out_dir / manifest_name
        path.write_text(_json_text(manifest), encoding="utf-8")
        return path


def _load_and_split(config: ExperimentConfig):
    pop = load_csv(config.dataset, config.schema)
    train, test = split(pop, config.train_fraction, config.split_seed)
    return pop, train, test


def cmd_fairness(config: ExperimentConfig, out_dir: Path) -> Path:
    """Train every configured model and emit curves, reports and MAEs."""
    runner = StageRunner(out_dir, config, "fairness")
    pop, train, test = _load_and_split(config)
    state: dict = {}

    def stage_train():
        state["models"] = {spec.name: fit_model(spec, train, config) for spec in config.models}
        report = {}
        for name, h in state["models"].items():
            report[name] = {
                "train": evaluate(h, train).to_dict(),
                "test": evaluate(h, test).to_dict(),
                "full": evaluate(h, pop).to_dict(),
            }
        state["mae"] = report
        (out_dir / "mae_report.json").write_text(_json_text(report), encoding="utf-8")
        (out_dir / "models.json").write_text(
            _json_text({name: h.to_dict() for name, h in state["models"].items()}),
            encoding="utf-8",
        )
        return ["mae_report.json", "models.json"]

    def stage_curves():
        audits = {
            name: FairnessAudit(h, train, config.effort, config.benefit)
            for name, h in state["models"].items()
        }
        state["audits"] = audits
        files = []
        for measure, fname in (
            (BOUNDED_EFFORT, "bounded_effort_curves.csv"),
            (THRESHOLD_REWARD, "threshold_reward_curves.csv"),
        ):
            rows = []
            for name in sorted(audits):
                audit = audits[name]
                curve = audit.sweep(measure, audit.default_grid(measure, config.delta_points))
                state.setdefault("curves", {})[(name, measure)] = curve
                for g in sorted(curve.per_group_values):
                    vals = curve.per_group_values[g]
                    feas = (curve.per_group_feasibility or {}).get(g)
                    for idx, (d, v) in enumerate(zip(curve.deltas, vals)):
                        row = [name, g, d, v]
                        if measure == THRESHOLD_REWARD:
                            row.append(feas[idx] if feas else 1.0)
                        rows.append(row)
            header = ["model", "group", "delta", "value"]
            if measure == THRESHOLD_REWARD:
                header.append("feasibility")
            _write_csv_rows(out_dir / fname, header, rows)
            files.append(fname)
        return files

    def stage_reports():
        bars = []
        combined: dict = {"benefit": config.benefit, "models": {}}
        for name in sorted(state["audits"]):
            audit = state["audits"][name]
            h = state["models"][name]
            er = audit.effort_reward()
            pos, neg = residual_differences(h, train)
            pos_full, neg_full = residual_differences(h, pop)
            combined["models"][name] = {
                "effort_reward": er.to_dict(),
                "positive_residual_train": pos.to_dict(),
                "negative_residual_train": neg.to_dict(),
                "positive_residual_full": pos_full.to_dict(),
                "negative_residual_full": neg_full.to_dict(),
                "mae": state["mae"][name],
            }
            for rep in (er, pos_full, neg_full):
                for g, v in sorted(rep.per_group_value.items()):
                    bars.append([name, rep.measure, g, v])
                bars.append([name, rep.measure, "__disparity__", rep.disparity])
        _write_csv_rows(out_dir / "fairness_bars.csv", ["model", "measure", "group", "value"], bars)
        (out_dir / "fairness_report.json").write_text(_json_text(combined), encoding="utf-8")
        return ["fairness_bars.csv", "fairness_report.json"]

    runner.run("train", stage_train)
    runner.run("delta_curves", stage_curves)
    runner.run("reports", stage_reports)
    return runner.finish()


def _segregation_rows(name, ctx, h, train, impact, config):
    threshold = config.centralization_threshold
    if threshold is None:
        threshold = float(np.mean(h.predict(train)))
    before, after = compare(
        ctx,
        h,
        train,
        impact.impacted,
        beta=config.beta,
        threshold=threshold,
        focal_points=impact.focal_points,
        connectivity_threshold=config.connectivity_threshold,
    )
    rows = []
    for pop_name, rep in (("initial", before), ("impacted", after)):
        for measure, value in rep.values().items():
            rows.append([name, measure, pop_name, value])
    return rows, before, after, threshold


def cmd_simulate(config: ExperimentConfig, out_dir: Path) -> Path:
    """Run the imitation round per model; emit impacted data and segregation."""
    runner = StageRunner(out_dir, config, "simulate")
    pop, train, test = _load_and_split(config)
    minority = _minority(config, train)
    ctx = MetricContext(reference=train, params=config.effort, minority=minority)
    seg_rows: list[list] = []
    summary: dict = {}

    def model_stage(spec: ModelSpec):
        def run():
            h = fit_model(spec, train, config)
            impact = simulate(h, train, config.effort, config.benefit)
            files = []
            impacted_csv = f"impacted_{spec.name}.csv"
            write_csv(impact.impacted, out_dir / impacted_csv)
            files.append(impacted_csv)
            shift_json = f"shift_{spec.name}.json"
            (out_dir / shift_json).write_text(
                _json_text(feature_shift_report(train, impact.impacted)), encoding="utf-8"
            )
            files.append(shift_json)
            outcomes_json = f"outcomes_{spec.name}.json"
            (out_dir / outcomes_json).write_text(
                _json_text([o.to_dict() for o in impact.outcomes]), encoding="utf-8"
            )
            files.append(outcomes_json)
            rows, before, after, threshold = _segregation_rows(
                spec.name, ctx, h, train, impact, config
            )
            seg_rows.extend(rows)
            summary[spec.name] = {
                "changed": sum(1 for o in impact.outcomes if o.changed),
                "focal_points": [
                    {"vector": fp.vector.tolist(), "count": fp.count}
                    for fp in impact.focal_points
                ],
                "threshold": threshold,
                "before": before.to_dict(),
                "after": after.to_dict(),
                "dynamics": impact.metadata,
            }
            return files

        return run

    for spec in config.models:
        runner.run(f"simulate_{spec.name}", model_stage(spec))

    def stage_summary():
        _write_csv_rows(
            out_dir / "segregation.csv",
            ["model", "measure", "population", "value"],
            seg_rows,
        )
        (out_dir / "simulate_report.json").write_text(_json_text(summary), encoding="utf-8")
        return ["segregation.csv", "simulate_report.json"]

    runner.run("segregation", stage_summary)
    return runner.finish()


def cmd_sweep_tau(config: ExperimentConfig, out_dir: Path) -> Path:
    """Constrained-linear sweep: fit, simulate and measure per tau."""
    if not config.tau_grid:
        raise SchemaError("tau grid must be nonempty")
    runner = StageRunner(out_dir, config, "sweep-tau")
    pop, train, test = _load_and_split(config)
    minority = _minority(config, train)
    ctx = MetricContext(reference=train, params=config.effort, minority=minority)
    fit_pop = train
    if config.sweep_features in ("mutable", MUTABLE_PLUS_SENSITIVE):
        fit_pop = restrict_features(train, MUTABLE_PLUS_SENSITIVE)
    rows: list[list] = []
    details: dict = {}

    def tau_stage(tau: float):
        def run():
            h = fit_constrained_linear(fit_pop, tau, config.benefit, minority)
            impact = simulate(h, train, config.effort, config.benefit)
            seg, before, after, threshold = _segregation_rows(
                f"tau_{_fmt(tau)}", ctx, h, train, impact, config
            )
            for _, measure, pop_name, value in seg:
                if pop_name == "impacted":
                    rows.append([tau, measure, value])
            gap = group_benefit_gap(h, train, config.benefit, minority)
            rows.append([tau, "benefit_gap", gap])
            details[_fmt(tau)] = {
                "weights": h.to_dict(),
                "benefit_gap": gap,
                "changed": sum(1 for o in impact.outcomes if o.changed),
                "threshold": threshold,
                "initial": before.to_dict(),
                "impacted": after.to_dict(),
            }
            return []

        return run

    for tau in config.tau_grid:
        runner.run(f"tau_{_fmt(tau)}", tau_stage(tau))

    def stage_emit():
        _write_csv_rows(out_dir / "tau_sweep.csv", ["tau", "measure", "value"], rows)
        (out_dir / "tau_report.json").write_text(_json_text(details), encoding="utf-8")
        return ["tau_sweep.csv", "tau_report.json"]

    runner.run("emit", stage_emit)
    return runner.finish()


def cmd_synth(spec_path: Path, out_dir: Path) -> Path:
    """Generate a synthetic population CSV from a schema-plus-sizes spec."""
    try:
        raw = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"synthetic spec not found: {spec_path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{spec_path}: invalid JSON ({exc})") from None
    for key in ("group_sizes", "seed"):
        if key not in raw:
            raise SchemaError(f"synthetic spec missing {key!r}")
    schema = schema_from_dict(raw)
    pop = generate_synthetic(
        schema,
        raw["group_sizes"],
        seed=int(raw["seed"]),
        shift=float(raw.get("shift", 0.0)),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "synthetic.csv"
    write_csv(pop, out_path)
    return out_path
