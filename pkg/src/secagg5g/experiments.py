"""Experiment orchestration: single runs, dropout sweeps, mode comparisons.

An ExperimentSpec is a flat bag of knobs loaded from a JSON file (CLI flags
override file keys). Results come back as one row per (sweep point, seed,
iteration) plus a metadata dict echoing every knob that affects them, and
are written as CSV (.-decimal, comma-separated, metadata as leading
``# key=value`` lines) or JSON. Row order is deterministic; only the
wall-clock timing columns vary between identical runs.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

from .fltask import generate_data
from .messages import MaskShareMode
from .simnet import DropoutSchedule, SimConfig, SimResult, run_simulation

logger = logging.getLogger(__name__)

SWEEP_AXES = ("none", "ue_dropout", "bs_dropout")

RESULT_COLUMNS = [
    "sweep_value",
    "seed",
    "iteration",
    "outcome",
    "online_ues",
    "online_bss",
    "accuracy",
    "bytes_ue_sent",
    "bytes_bs_sent",
    "bytes_af_sent",
    "time_setup_ms",
    "time_aggregation_ms",
    "mode",
]

COMPARE_COLUMNS = [
    "mode",
    "seed",
    "iteration",
    "outcome",
    "accuracy",
    "bytes_bs_sent",
    "msgs_bs_to_af",
    "bs_payload_bytes",
]

TIMING_COLUMNS = ("time_setup_ms", "time_aggregation_ms")


@dataclass
class ExperimentSpec:
    # protocol / simulator
    n_ues: int = 8
    n_bss: int = 4
    bs_threshold: int = 3
    min_online_fraction: float = 1.0 / 3.0
    iterations: int = 10
    latency_base_ms: float = 5.0
    latency_jitter_ms: float = 5.0
    deadline_ms: float = 50.0
    mask_share_mode: str = "evaluated"
    frac_bits: int = 16
    magnitude_bound: float = 1.0
    max_summands: int = 1024
    # training task
    feature_dim: int = 9
    samples_per_shard: int = 40
    test_samples: int = 200
    learning_rate: float = 0.5
    local_epochs: int = 2
    data_seed: int = 7
    # experiment shape
    seeds: list[int] = dc_field(default_factory=lambda: [0])
    sweep_axis: str = "none"
    sweep_min: int = 0
    sweep_max: int | None = None
    ue_dropout: int = 0
    bs_dropout: int = 0
    output: str = "results.csv"
    format: str = "csv"

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "ExperimentSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        spec = cls(**raw)
        spec.validate()
        return spec

    @property
    def model_dim(self) -> int:
        return self.feature_dim + 1

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep_axis must be one of {SWEEP_AXES}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.mask_share_mode.upper() not in MaskShareMode.__members__:
            raise ValueError("mask_share_mode must be evaluated or compact")
        if not 0 <= self.ue_dropout <= self.n_ues:
            raise ValueError("ue_dropout outside [0, n_ues]")
        if not 0 <= self.bs_dropout <= self.n_bss:
            raise ValueError("bs_dropout outside [0, n_bss]")
        if self.sweep_axis != "none":
            hi = self.sweep_cap()
            if self.sweep_max is not None and not 0 <= self.sweep_max <= hi:
                raise ValueError(f"sweep_max outside [0, {hi}]")
            if not 0 <= self.sweep_min <= (self.sweep_max if self.sweep_max is not None else hi):
                raise ValueError("sweep_min outside sweep range")
        # surfaces invalid combinations (threshold, deadline, codec) early
        self.sim_config(self.seeds[0])

    def sweep_cap(self) -> int:
        """Largest dropout count on the active axis, leaving two entities."""
        if self.sweep_axis == "ue_dropout":
            return max(self.n_ues - 2, 0)
        if self.sweep_axis == "bs_dropout":
            return max(self.n_bss - 2, 0)
        return 0

    def sweep_values(self) -> list[int]:
        if self.sweep_axis == "none":
            return [0]
        hi = self.sweep_max if self.sweep_max is not None else self.sweep_cap()
        return list(range(self.sweep_min, hi + 1))

    def mode(self) -> MaskShareMode:
        return MaskShareMode[self.mask_share_mode.upper()]

    def sim_config(self, seed: int, mode: MaskShareMode | None = None) -> SimConfig:
        return SimConfig(
            n_ues=self.n_ues,
            n_bss=self.n_bss,
            bs_threshold=self.bs_threshold,
            min_online_fraction=self.min_online_fraction,
            model_dim=self.model_dim,
            iterations=self.iterations,
            rng_seed=seed,
            latency_base_ms=self.latency_base_ms,
            latency_jitter_ms=self.latency_jitter_ms,
            deadline_ms=self.deadline_ms,
            mask_share_mode=mode if mode is not None else self.mode(),
            frac_bits=self.frac_bits,
            magnitude_bound=self.magnitude_bound,
            max_summands=self.max_summands,
        )

    def task(self, seed: int):
        # each run seed draws its own data so per-seed accuracies vary
        return generate_data(
            seed=self.data_seed * 1_000_003 + seed,
            n_ues=self.n_ues,
            feature_dim=self.feature_dim,
            samples_per_shard=self.samples_per_shard,
            test_samples=self.test_samples,
            learning_rate=self.learning_rate,
            local_epochs=self.local_epochs,
            clip_bound=self.magnitude_bound,
        )

    def schedule(self, ue_drop: int, bs_drop: int) -> DropoutSchedule:
        """Drop the highest-indexed entities for the whole run, shrinking the
        active population exactly as a sustained outage would."""
        return DropoutSchedule.constant(
            ue_ids=range(self.n_ues - ue_drop + 1, self.n_ues + 1),
            bs_ids=range(self.n_bss - bs_drop + 1, self.n_bss + 1),
        )

    def metadata(self) -> dict:
        out = asdict(self)
        out["model_dim"] = self.model_dim
        return out


def _result_rows(
    spec: ExperimentSpec, result: SimResult, sweep_value: int, seed: int
) -> list[dict]:
    rows = []
    for rm in result.rounds:
        rows.append(
            {
                "sweep_value": sweep_value,
                "seed": seed,
                "iteration": rm.iteration,
                "outcome": rm.outcome,
                "online_ues": rm.online_ues,
                "online_bss": rm.online_bss,
                "accuracy": rm.accuracy,
                "bytes_ue_sent": rm.bytes_ue_sent,
                "bytes_bs_sent": rm.bytes_bs_sent,
                "bytes_af_sent": rm.bytes_af_sent,
                "time_setup_ms": result.setup.time_setup_ms,
                "time_aggregation_ms": rm.time_ue_ms + rm.time_bs_ms + rm.time_af_ms,
                "mode": result.config.mask_share_mode.name,
            }
        )
    return rows


def run_experiment(spec: ExperimentSpec) -> tuple[dict, list[dict]]:
    """One row per (sweep point, seed, iteration), deterministically ordered."""
    spec.validate()
    rows: list[dict] = []
    for value in spec.sweep_values():
        ue_drop = value if spec.sweep_axis == "ue_dropout" else spec.ue_dropout
        bs_drop = value if spec.sweep_axis == "bs_dropout" else spec.bs_dropout
        schedule = spec.schedule(ue_drop, bs_drop)
        for seed in spec.seeds:
            logger.info("sweep=%s value=%d seed=%d", spec.sweep_axis, value, seed)
            result = run_simulation(spec.sim_config(seed), schedule, spec.task(seed))
            rows.extend(_result_rows(spec, result, value, seed))
    rows.sort(key=lambda r: (r["sweep_value"], r["seed"], r["iteration"]))
    return spec.metadata(), rows


def compare_modes(spec: ExperimentSpec) -> tuple[dict, list[dict]]:
    """Run identical seeds under both mask-share modes.

    Accuracies must agree exactly between modes (the recovered masks are
    identical field vectors); a mismatch means the protocol is broken, so it
    raises rather than reporting.
    """
    spec.validate()
    schedule = spec.schedule(spec.ue_dropout, spec.bs_dropout)
    rows: list[dict] = []
    accuracies: dict[tuple, dict[str, float]] = {}
    for mode in (MaskShareMode.EVALUATED, MaskShareMode.COMPACT):
        for seed in spec.seeds:
            result = run_simulation(spec.sim_config(seed, mode), schedule, spec.task(seed))
            for rm in result.rounds:
                per_msg = rm.bytes_bs_sent / rm.msgs_bs_to_af if rm.msgs_bs_to_af else 0.0
                rows.append(
                    {
                        "mode": mode.name,
                        "seed": seed,
                        "iteration": rm.iteration,
                        "outcome": rm.outcome,
                        "accuracy": rm.accuracy,
                        "bytes_bs_sent": rm.bytes_bs_sent,
                        "msgs_bs_to_af": rm.msgs_bs_to_af,
                        "bs_payload_bytes": per_msg - 17 if per_msg else 0.0,
                    }
                )
                accuracies.setdefault((seed, rm.iteration), {})[mode.name] = rm.accuracy
    for key, by_mode in accuracies.items():
        if by_mode["EVALUATED"] != by_mode["COMPACT"]:
            raise RuntimeError(f"mode accuracies diverge at (seed, iteration)={key}")
    rows.sort(key=lambda r: (r["mode"], r["seed"], r["iteration"]))
    meta = spec.metadata()
    evaluated = [r["bs_payload_bytes"] for r in rows if r["mode"] == "EVALUATED" and r["bs_payload_bytes"]]
    compact = [r["bs_payload_bytes"] for r in rows if r["mode"] == "COMPACT" and r["bs_payload_bytes"]]
    if evaluated and compact:
        meta["bs_payload_ratio"] = (sum(evaluated) / len(evaluated)) / (
            sum(compact) / len(compact)
        )
    return meta, rows


def write_csv(path, metadata: dict, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in sorted(metadata):
            fh.write(f"# {key}={metadata[key]}\n")
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_json(path, metadata: dict, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"metadata": metadata, "rows": rows}, fh, indent=2)
        fh.write("\n")


def write_results(spec: ExperimentSpec, metadata: dict, rows: list[dict], columns) -> None:
    if spec.format == "csv":
        write_csv(spec.output, metadata, rows, columns)
    else:
        write_json(spec.output, metadata, rows)
