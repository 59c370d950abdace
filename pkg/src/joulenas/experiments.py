"""Reproducible experiment harnesses and report emission.

run_fewshot_benchmark measures two-stage vs joint estimator test RMSE as a
function of the target-device sample count; characterize_space summarizes
the energy/accuracy landscape of the search space; pareto_report flags
dominated (accuracy, energy) points. All outputs are deterministic under
fixed seeds and emitted as plain CSV/JSON plot data.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import arch_space, mlp_core
from .arch_space import DetectorArchitecture
from .data_io import EnergyDataset, dataset_hash, split_fewshot
from .devices import DeviceId
from .energy_estimator import (
    DEFAULT_ADAPT_CONFIG,
    DEFAULT_HIDDEN_SIZE,
    dataset_stats,
    finetune_joint,
    fit_residual,
    predict_batch,
    predict_joint_batch,
    pretrain_base,
    pretrain_joint,
)
from .mlp_core import Network, TrainConfig
from .seeds import derive_seed

FEWSHOT_CSV_HEADER = "n_target,model,mean_rmse,sd_rmse,runs"
MODEL_TWO_STAGE = "two_stage"
MODEL_JOINT = "joint"

DEFAULT_PRETRAIN_CONFIG = TrainConfig(learning_rate=0.05, epochs=150, batch_size=32)


@dataclass(frozen=True)
class FewShotBenchConfig:
    pretrain: TrainConfig = DEFAULT_PRETRAIN_CONFIG
    adapt: TrainConfig = DEFAULT_ADAPT_CONFIG
    hidden_size: int = DEFAULT_HIDDEN_SIZE


@dataclass(frozen=True)
class FewShotCell:
    n_target: int
    model: str
    mean_rmse: float
    sd_rmse: float
    runs: int


@dataclass(frozen=True)
class FewShotReport:
    cells: tuple[FewShotCell, ...]
    metadata: Mapping

    def cell(self, n_target: int, model: str) -> FewShotCell:
        for c in self.cells:
            if c.n_target == n_target and c.model == model:
                return c
        raise KeyError(f"no cell for (n_target={n_target}, model={model!r})")


def fewshot_csv_text(report: FewShotReport) -> str:
    lines = [FEWSHOT_CSV_HEADER]
    for c in sorted(report.cells, key=lambda c: (c.n_target, c.model)):
        lines.append(f"{c.n_target},{c.model},{c.mean_rmse!r},{c.sd_rmse!r},{c.runs}")
    return "\n".join(lines) + "\n"


def write_fewshot_report(report: FewShotReport, csv_path: str | Path, meta_path: str | Path | None = None) -> None:
    Path(csv_path).write_text(fewshot_csv_text(report), encoding="utf-8")
    if meta_path is not None:
        Path(meta_path).write_text(
            json.dumps(dict(report.metadata), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


def _test_rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    err = predictions - targets
    return float(np.sqrt(np.mean(err * err)))


def _bench_repetition(payload) -> list[tuple[int, str, float]]:
    """One repetition: pretrain both models once, adapt at every n, eval RMSE."""
    ds, target_name, n_values, r, cfgs, root_seed = payload
    target = ds.registry.device(target_name)
    stats = dataset_stats(ds)
    target_stats = stats[target_name]
    source_rows = np.array(
        [i for i, rec in enumerate(ds.records) if rec.device != target], dtype=np.int64
    )
    source = ds.subset(source_rows)

    pre_cfg = replace(cfgs.pretrain, rng_seed=derive_seed(root_seed, "pretrain", r))
    two_stage_pre = pretrain_base(source, pre_cfg, cfgs.hidden_size)
    joint_pre = pretrain_joint(source, pre_cfg, cfgs.hidden_size)

    out: list[tuple[int, str, float]] = []
    for n in n_values:
        split = split_fewshot(ds, target, n, derive_seed(root_seed, "split", n, r))
        test_enc = split.target_test.encodings
        test_y = target_stats.normalize(split.target_test.energies)

        ts_cfg = replace(cfgs.adapt, rng_seed=derive_seed(root_seed, "adapt-two-stage", n, r))
        fitted = fit_residual(two_stage_pre, split.target_train, ts_cfg, stats=target_stats)
        out.append(
            (n, MODEL_TWO_STAGE, _test_rmse(predict_batch(fitted, test_enc, target), test_y))
        )

        j_cfg = replace(cfgs.adapt, rng_seed=derive_seed(root_seed, "adapt-joint", n, r))
        tuned = finetune_joint(joint_pre, split.target_train, j_cfg, stats=target_stats)
        out.append(
            (n, MODEL_JOINT, _test_rmse(predict_joint_batch(tuned, test_enc, target), test_y))
        )
    return out


def run_fewshot_benchmark(
    ds: EnergyDataset,
    target: DeviceId,
    n_values: Sequence[int],
    repetitions: int,
    cfgs: FewShotBenchConfig | None = None,
    root_seed: int = 0,
    workers: int = 1,
) -> FewShotReport:
    """Pretrain on source devices, adapt on n target samples, report test RMSE.

    Every (n, repetition) cell uses its own split and adaptation seed; the
    pretrained models depend only on the source pool and the repetition seed,
    so they are computed once per repetition and shared across n (identical
    results to retraining, by the training determinism contract).
    """
    cfgs = cfgs or FewShotBenchConfig()
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values or n_values[0] < 1:
        raise ValueError("n_values must be positive sample counts")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    present = ds.devices_present()
    if target not in present:
        raise ValueError(f"target device {target.name!r} has no rows in the dataset")
    if len(present) < 2:
        raise ValueError("benchmark needs at least one source device besides the target")
    if ds.device_count(target) <= max(n_values):
        raise ValueError(
            f"target device {target.name!r} has {ds.device_count(target)} rows; "
            f"need more than max(n_values)={max(n_values)} to keep a test set"
        )

    payloads = [(ds, target.name, n_values, r, cfgs, root_seed) for r in range(repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_bench_repetition, payloads))
    else:
        per_rep = [_bench_repetition(p) for p in payloads]

    by_cell: dict[tuple[int, str], list[float]] = {
        (n, m): [] for n in n_values for m in (MODEL_JOINT, MODEL_TWO_STAGE)
    }
    for rep in per_rep:
        for n, model, value in rep:
            by_cell[(n, model)].append(value)

    cells = []
    for (n, model), values in sorted(by_cell.items()):
        arr = np.array(values)
        if len(arr) != repetitions:
            raise RuntimeError(f"cell ({n}, {model}) has {len(arr)} runs, expected {repetitions}")
        cells.append(
            FewShotCell(n, model, float(arr.mean()), float(arr.std(ddof=0)), repetitions)
        )
    metadata = {
        "root_seed": root_seed,
        "repetitions": repetitions,
        "n_values": n_values,
        "target": target.name,
        "source_devices": [d.name for d in present if d != target],
        "dataset_hash": dataset_hash(ds),
        "pretrain": {
            "learning_rate": cfgs.pretrain.learning_rate,
            "epochs": cfgs.pretrain.epochs,
            "batch_size": cfgs.pretrain.batch_size,
            "l2_penalty": cfgs.pretrain.l2_penalty,
        },
        "adapt": {
            "learning_rate": cfgs.adapt.learning_rate,
            "epochs": cfgs.adapt.epochs,
            "batch_size": cfgs.adapt.batch_size,
            "l2_penalty": cfgs.adapt.l2_penalty,
        },
        "hidden_size": cfgs.hidden_size,
        "normalization": "per-device range over the full measurement pool",
        "mlp_backend": mlp_core.backend_name(),
    }
    return FewShotReport(tuple(cells), metadata)


# ---------------------------------------------------------------------------
# Search-space characterization.


@dataclass(frozen=True)
class SpaceReport:
    n_samples: int
    seed: int
    energy_mean: float
    energy_quantiles: Mapping[str, float]
    histogram_edges: tuple[float, ...]
    histogram_counts: tuple[int, ...]
    baseline_energy: float
    global_proxy_mean: float
    iterative_proxy_mean: float
    metadata: Mapping

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "energy": {
                "mean": self.energy_mean,
                "quantiles": dict(self.energy_quantiles),
                "histogram": {
                    "edges": list(self.histogram_edges),
                    "counts": list(self.histogram_counts),
                },
            },
            "baseline_energy": self.baseline_energy,
            "proxy": {
                "global_pool_mean": self.global_proxy_mean,
                "iterative_pool_mean": self.iterative_proxy_mean,
            },
            "metadata": dict(self.metadata),
        }


def _proxy_scores(proxy, archs: Sequence[DetectorArchitecture]) -> np.ndarray:
    if isinstance(proxy, Network):
        return mlp_core.forward_batch(proxy, arch_space.encode_architectures(archs))
    return np.array([float(proxy(a)) for a in archs])


def characterize_space(
    n_samples: int,
    seed: int,
    energy_fn: Callable[[DetectorArchitecture], float],
    proxy,
    baseline: DetectorArchitecture | float,
    incumbent: DetectorArchitecture | None = None,
    bins: int = 20,
) -> SpaceReport:
    """Summarize sampled energies against a baseline and compare candidate pools.

    The global pool samples every block slot uniformly. The iterative pool
    mimics one coordinate step: per sample a single stage is resampled while
    the other two stay at the incumbent (the search midpoint by default).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    incumbent = incumbent or arch_space.DEFAULT_INIT_ARCHITECTURE

    global_pool = arch_space.sample_uniform(derive_seed(seed, "global-pool"), n_samples)
    energies = np.array([float(energy_fn(a)) for a in global_pool])
    counts, edges = np.histogram(energies, bins=bins)
    quantiles = {
        f"p{int(q * 100):02d}": float(np.quantile(energies, q))
        for q in (0.05, 0.25, 0.50, 0.75, 0.95)
    }

    rng = np.random.default_rng(derive_seed(seed, "iterative-pool"))
    stage_kinds = list(arch_space.StageKind)
    iterative_pool = []
    base_idx = arch_space.architecture_indices(incumbent)
    for _ in range(n_samples):
        stage = stage_kinds[int(rng.integers(0, len(stage_kinds)))]
        lo, hi = arch_space.STAGE_BLOCK_RANGE[stage]
        idx = base_idx.copy()
        idx[lo:hi] = rng.integers(0, arch_space.NUM_BLOCK_CHOICES, size=hi - lo)
        iterative_pool.append(arch_space.architecture_from_indices(idx))

    baseline_energy = (
        float(baseline) if isinstance(baseline, (int, float)) else float(energy_fn(baseline))
    )
    return SpaceReport(
        n_samples=n_samples,
        seed=seed,
        energy_mean=float(energies.mean()),
        energy_quantiles=quantiles,
        histogram_edges=tuple(float(e) for e in edges),
        histogram_counts=tuple(int(c) for c in counts),
        baseline_energy=baseline_energy,
        global_proxy_mean=float(_proxy_scores(proxy, global_pool).mean()),
        iterative_proxy_mean=float(_proxy_scores(proxy, iterative_pool).mean()),
        metadata={
            "iterative_pool": "one uniformly chosen stage resampled per draw; "
            "other stages fixed at the incumbent",
            "incumbent": arch_space.architecture_to_json_dict(incumbent),
        },
    )


def write_space_report(report: SpaceReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Pareto dominance (higher accuracy, lower energy preferred).

PARETO_CSV_HEADER = "label,accuracy,energy,dominated"


@dataclass(frozen=True)
class ParetoEntry:
    label: str
    accuracy: float
    energy: float
    dominated: bool


def pareto_report(results: Sequence[tuple[str, float, float]]) -> list[ParetoEntry]:
    """Flag dominated points via an energy-sorted sweep (O(n log n)).

    A point is dominated if some other point has accuracy >= and energy <=
    with at least one strict inequality.
    """
    if not results:
        raise ValueError("pareto_report needs at least one entry")
    items = [(str(lab), float(acc), float(en)) for lab, acc, en in results]
    order = sorted(range(len(items)), key=lambda i: (items[i][2], -items[i][1], items[i][0]))

    dominated = [False] * len(items)
    best_acc_lower = -np.inf  # max accuracy among strictly lower-energy points
    i = 0
    while i < len(order):
        j = i
        energy = items[order[i]][2]
        while j < len(order) and items[order[j]][2] == energy:
            j += 1
        group = order[i:j]
        group_max_acc = max(items[g][1] for g in group)
        for g in group:
            acc = items[g][1]
            dominated[g] = best_acc_lower >= acc or group_max_acc > acc
        best_acc_lower = max(best_acc_lower, group_max_acc)
        i = j

    return [
        ParetoEntry(items[g][0], items[g][1], items[g][2], dominated[g]) for g in order
    ]


def pareto_csv_text(entries: Sequence[ParetoEntry]) -> str:
    lines = [PARETO_CSV_HEADER]
    for e in entries:
        lines.append(f"{e.label},{e.accuracy!r},{e.energy!r},{str(e.dominated).lower()}")
    return "\n".join(lines) + "\n"


def write_pareto_csv(entries: Sequence[ParetoEntry], path: str | Path) -> None:
    Path(path).write_text(pareto_csv_text(entries), encoding="utf-8")
