"""Two-stage energy model: a frozen generic prior plus a per-device residual.

The estimate for architecture a on hardware h is base(a) + residual(a, h).
The base is pretrained on source devices from architecture encodings alone;
the residual sees the architecture and a one-hot device encoding and is fit
on a handful of measured target-device samples. A single joint network over
the concatenated encoding serves as the comparison baseline. Energies are
modeled in per-device normalized units.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import arch_space, mlp_core
from .arch_space import DetectorArchitecture
from .data_io import EnergyDataset
from .devices import DeviceId, DeviceRegistry
from .mlp_core import Network, TrainConfig
from .seeds import derive_seed

BUNDLE_FORMAT_VERSION = 1
DEFAULT_HIDDEN_SIZE = 400

# Few-shot adaptation default: full batch (batch_size clamps to the sample
# count), many epochs, small step; avoids shuffling noise at tiny n.
DEFAULT_ADAPT_CONFIG = TrainConfig(learning_rate=0.01, epochs=500, batch_size=1024)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-device min/max used to map joules onto [0, 1] for the fitting set."""

    device: DeviceId
    min_energy: float
    max_energy: float

    def __post_init__(self) -> None:
        if not self.max_energy > self.min_energy:
            raise ValueError(
                f"max_energy must exceed min_energy for device {self.device.name!r}"
            )

    def normalize(self, e: float | np.ndarray):
        """Linear map; out-of-range energies pass through beyond [0, 1]."""
        return (e - self.min_energy) / (self.max_energy - self.min_energy)

    def denormalize(self, v: float | np.ndarray):
        return v * (self.max_energy - self.min_energy) + self.min_energy


def normalize(e: float, stats: NormalizationStats) -> float:
    return float(stats.normalize(e))


def stats_from_values(device: DeviceId, energies: Sequence[float]) -> NormalizationStats:
    arr = np.asarray(energies, dtype=float)
    if arr.size == 0:
        raise ValueError(f"no energies to compute stats for device {device.name!r}")
    return NormalizationStats(device, float(arr.min()), float(arr.max()))


def stats_from_dataset(ds: EnergyDataset, device: DeviceId) -> NormalizationStats:
    rows = ds.device_rows(device)
    return stats_from_values(device, [ds.records[i].energy for i in rows])


def dataset_stats(ds: EnergyDataset) -> dict[str, NormalizationStats]:
    return {d.name: stats_from_dataset(ds, d) for d in ds.devices_present()}


def _normalized_targets(
    ds: EnergyDataset, stats_by_name: Mapping[str, NormalizationStats]
) -> np.ndarray:
    if ds.normalized:
        return ds.energies
    out = np.empty(len(ds))
    for i, r in enumerate(ds.records):
        out[i] = stats_by_name[r.device.name].normalize(r.energy)
    return out


def _as_encoding(a, dim: int) -> np.ndarray:
    if isinstance(a, DetectorArchitecture):
        enc = arch_space.encode_architecture(a)
    else:
        enc = np.asarray(a, dtype=float)
    if enc.shape != (dim,):
        raise ValueError(f"architecture encoding must have shape ({dim},), got {enc.shape}")
    return enc


def _with_device(enc: np.ndarray, registry: DeviceRegistry, dev: DeviceId) -> np.ndarray:
    return np.concatenate([enc, registry.one_hot(dev)])


def _with_device_batch(enc: np.ndarray, registry: DeviceRegistry, dev: DeviceId) -> np.ndarray:
    onehot = np.broadcast_to(registry.one_hot(dev), (enc.shape[0], len(registry)))
    return np.hstack([enc, onehot])


@dataclass(frozen=True)
class TwoStageEstimator:
    base: Network
    residual: Network
    registry: DeviceRegistry
    stats: Mapping[str, NormalizationStats]
    base_frozen: bool = True

    @property
    def arch_dim(self) -> int:
        return self.base.input_dim

    def __post_init__(self) -> None:
        expected = self.arch_dim + len(self.registry)
        if self.residual.input_dim != expected:
            raise ValueError(
                f"residual input dim {self.residual.input_dim} != arch dim + registry size {expected}"
            )


@dataclass(frozen=True)
class JointEstimator:
    net: Network
    registry: DeviceRegistry
    stats: Mapping[str, NormalizationStats]

    def __post_init__(self) -> None:
        if self.net.input_dim <= len(self.registry):
            raise ValueError(
                f"joint net input dim {self.net.input_dim} leaves no room for the "
                f"architecture encoding ({len(self.registry)} device slots)"
            )

    @property
    def arch_dim(self) -> int:
        return self.net.input_dim - len(self.registry)


def pretrain_base(
    source_data: EnergyDataset,
    cfg: TrainConfig,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
) -> TwoStageEstimator:
    """Train the generic prior on pooled source devices (architecture only).

    The residual net comes back zero-initialized on its output layer, so the
    fresh estimator predicts exactly what the base does on every device.
    """
    if len(source_data) == 0:
        raise ValueError("source data must be nonempty")
    stats = {} if source_data.normalized else dataset_stats(source_data)
    y = _normalized_targets(source_data, stats)
    dim = source_data.encoding_dim
    hidden = (hidden_size,) if hidden_size > 0 else ()
    base = mlp_core.init_network((dim, *hidden, 1), derive_seed(cfg.rng_seed, "base-init"))
    base, _ = mlp_core.train(base, (source_data.encodings, y), cfg)
    residual = mlp_core.init_network(
        (dim + len(source_data.registry), *hidden, 1),
        derive_seed(cfg.rng_seed, "residual-init"),
    )
    residual = mlp_core.zero_output_layer(residual)
    return TwoStageEstimator(base, residual, source_data.registry, dict(stats))


def _coerce_samples(
    samples, registry: DeviceRegistry, arch_dim: int
) -> tuple[np.ndarray, list[DeviceId], np.ndarray, bool]:
    """Accept an EnergyDataset or (arch-or-encoding, DeviceId, energy) triples."""
    if isinstance(samples, EnergyDataset):
        devs = [r.device for r in samples.records]
        return samples.encodings, devs, samples.energies, samples.normalized
    encs, devs, energies = [], [], []
    for arch, dev, energy in samples:
        encs.append(_as_encoding(arch, arch_dim))
        devs.append(dev)
        energies.append(float(energy))
    if not encs:
        return np.empty((0, arch_dim)), [], np.empty(0), False
    return np.vstack(encs), devs, np.array(energies), False


def fit_residual(
    est: TwoStageEstimator,
    target_samples,
    cfg: TrainConfig = DEFAULT_ADAPT_CONFIG,
    stats: NormalizationStats | None = None,
) -> TwoStageEstimator:
    """Fit the device residual on measured target samples; the base is frozen.

    Residual targets are normalized energies minus base predictions. When no
    stats are supplied (and none are registered for the device), they come
    from the few-shot samples themselves, which is the deployment fallback:
    the normalization range then reflects only those samples.
    """
    enc, devs, energies, pre_normalized = _coerce_samples(
        target_samples, est.registry, est.arch_dim
    )
    if len(devs) == 0:
        raise ValueError("target samples must be nonempty")
    device = devs[0]
    if any(d != device for d in devs):
        raise ValueError("all target samples must come from a single device")
    if device not in est.registry:
        raise ValueError(f"device {device.name!r} is not registered")

    if pre_normalized:
        y_norm = energies
        stats = stats or est.stats.get(device.name)
    else:
        if stats is None:
            stats = est.stats.get(device.name) or stats_from_values(device, energies)
        y_norm = stats.normalize(energies)

    base_pred = mlp_core.forward_batch(est.base, enc)
    residual_targets = y_norm - base_pred
    X = _with_device_batch(enc, est.registry, device)
    residual, _ = mlp_core.train(est.residual, (X, residual_targets), cfg)

    new_stats = dict(est.stats)
    if stats is not None:
        new_stats[device.name] = stats
    return TwoStageEstimator(est.base, residual, est.registry, new_stats)


def base_component(est: TwoStageEstimator, a) -> float:
    """Architecture-only part of the estimate; independent of the device."""
    return mlp_core.forward(est.base, _as_encoding(a, est.arch_dim))


def residual_component(est: TwoStageEstimator, a, h: DeviceId) -> float:
    enc = _as_encoding(a, est.arch_dim)
    return mlp_core.forward(est.residual, _with_device(enc, est.registry, h))


def predict(est: TwoStageEstimator, a, h: DeviceId) -> float:
    """Normalized energy estimate base(a) + residual(a, h)."""
    if h not in est.registry:
        raise ValueError(f"device {h.name!r} is not registered")
    return base_component(est, a) + residual_component(est, a, h)


def predict_batch(est: TwoStageEstimator, encodings: np.ndarray, h: DeviceId) -> np.ndarray:
    if h not in est.registry:
        raise ValueError(f"device {h.name!r} is not registered")
    base = mlp_core.forward_batch(est.base, encodings)
    res = mlp_core.forward_batch(est.residual, _with_device_batch(encodings, est.registry, h))
    return base + res


def predict_joules(est: TwoStageEstimator, a, h: DeviceId) -> float:
    """Map the normalized estimate back to joules via the device stats."""
    st = est.stats.get(h.name)
    if st is None:
        raise ValueError(f"no normalization stats recorded for device {h.name!r}")
    return float(st.denormalize(predict(est, a, h)))


# ---------------------------------------------------------------------------
# Joint baseline: one network over the concatenated architecture + device
# encoding, pretrained on source devices and fine-tuned end to end.


def pretrain_joint(
    source_data: EnergyDataset,
    cfg: TrainConfig,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
) -> JointEstimator:
    if len(source_data) == 0:
        raise ValueError("source data must be nonempty")
    stats = {} if source_data.normalized else dataset_stats(source_data)
    y = _normalized_targets(source_data, stats)
    registry = source_data.registry
    X = np.hstack(
        [
            source_data.encodings,
            np.array([registry.one_hot(r.device) for r in source_data.records]),
        ]
    )
    dim = source_data.encoding_dim + len(registry)
    hidden = (hidden_size,) if hidden_size > 0 else ()
    net = mlp_core.init_network((dim, *hidden, 1), derive_seed(cfg.rng_seed, "joint-init"))
    net, _ = mlp_core.train(net, (X, y), cfg)
    return JointEstimator(net, registry, dict(stats))


def finetune_joint(
    est: JointEstimator,
    target_samples,
    cfg: TrainConfig = DEFAULT_ADAPT_CONFIG,
    stats: NormalizationStats | None = None,
) -> JointEstimator:
    """Fine-tune every parameter on the target-device samples (N_h >= 1)."""
    enc, devs, energies, pre_normalized = _coerce_samples(
        target_samples, est.registry, est.arch_dim
    )
    if len(devs) == 0:
        raise ValueError("target samples must be nonempty")
    device = devs[0]
    if any(d != device for d in devs):
        raise ValueError("all target samples must come from a single device")
    if device not in est.registry:
        raise ValueError(f"device {device.name!r} is not registered")
    if pre_normalized:
        y_norm = energies
        stats = stats or est.stats.get(device.name)
    else:
        if stats is None:
            stats = est.stats.get(device.name) or stats_from_values(device, energies)
        y_norm = stats.normalize(energies)
    X = _with_device_batch(enc, est.registry, device)
    net, _ = mlp_core.train(est.net, (X, y_norm), cfg)
    new_stats = dict(est.stats)
    if stats is not None:
        new_stats[device.name] = stats
    return JointEstimator(net, est.registry, new_stats)


def pretrain_and_finetune_joint(
    source_data: EnergyDataset,
    target_samples,
    cfg: TrainConfig,
    finetune_cfg: TrainConfig | None = None,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
    stats: NormalizationStats | None = None,
) -> JointEstimator:
    pre = pretrain_joint(source_data, cfg, hidden_size)
    adapt = finetune_cfg or replace(
        DEFAULT_ADAPT_CONFIG, rng_seed=derive_seed(cfg.rng_seed, "joint-finetune")
    )
    return finetune_joint(pre, target_samples, adapt, stats=stats)


def predict_joint(est: JointEstimator, a, h: DeviceId) -> float:
    if h not in est.registry:
        raise ValueError(f"device {h.name!r} is not registered")
    enc = _as_encoding(a, est.arch_dim)
    return mlp_core.forward(est.net, _with_device(enc, est.registry, h))


def predict_joint_batch(est: JointEstimator, encodings: np.ndarray, h: DeviceId) -> np.ndarray:
    if h not in est.registry:
        raise ValueError(f"device {h.name!r} is not registered")
    return mlp_core.forward_batch(est.net, _with_device_batch(encodings, est.registry, h))


# ---------------------------------------------------------------------------
# Estimator bundles.


def _stats_to_json(stats: Mapping[str, NormalizationStats]) -> dict:
    return {
        name: {"min_energy": s.min_energy, "max_energy": s.max_energy}
        for name, s in sorted(stats.items())
    }


def _stats_from_json(d: Mapping, registry: DeviceRegistry) -> dict[str, NormalizationStats]:
    return {
        name: NormalizationStats(
            registry.device(name), float(v["min_energy"]), float(v["max_energy"])
        )
        for name, v in d.items()
    }


def estimator_bundle_dict(
    est: TwoStageEstimator | JointEstimator, provenance: Mapping | None = None
) -> dict:
    d = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "registry": list(est.registry.names),
        "stats": _stats_to_json(est.stats),
        "provenance": dict(provenance or {}),
    }
    if isinstance(est, TwoStageEstimator):
        d["kind"] = "two_stage"
        d["base"] = mlp_core.to_checkpoint_dict(est.base)
        d["residual"] = mlp_core.to_checkpoint_dict(est.residual)
    else:
        d["kind"] = "joint"
        d["net"] = mlp_core.to_checkpoint_dict(est.net)
    return d


def save_estimator_bundle(
    est: TwoStageEstimator | JointEstimator,
    path: str | Path,
    provenance: Mapping | None = None,
) -> None:
    Path(path).write_text(
        json.dumps(estimator_bundle_dict(est, provenance), sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_estimator_bundle(path: str | Path) -> TwoStageEstimator | JointEstimator:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise ValueError(f"unsupported bundle format: {d.get('format_version')!r}")
    registry = DeviceRegistry(d["registry"])
    stats = _stats_from_json(d.get("stats", {}), registry)
    if d["kind"] == "two_stage":
        return TwoStageEstimator(
            mlp_core.from_checkpoint_dict(d["base"]),
            mlp_core.from_checkpoint_dict(d["residual"]),
            registry,
            stats,
        )
    if d["kind"] == "joint":
        return JointEstimator(mlp_core.from_checkpoint_dict(d["net"]), registry, stats)
    raise ValueError(f"unknown estimator kind {d.get('kind')!r}")
