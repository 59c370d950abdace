"""Energy measurement datasets: CSV/JSON ingestion, synthetic oracles, splits.

A dataset bundle on disk is three files: energy.csv (arch_id,device,energy_j),
archs.json (arch_id -> architecture JSON, or a raw encoding vector for foreign
search spaces), and registry.json (ordered device names). Writers are
deterministic and round-trip byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import arch_space
from .arch_space import DetectorArchitecture
from .devices import DeviceId, DeviceRegistry, load_registry, save_registry
from .errors import DataError

ENERGY_CSV_HEADER = "arch_id,device,energy_j"


@dataclass(frozen=True)
class EnergyRecord:
    """One measured (architecture, device, energy) row.

    `arch` is None for opaque external-benchmark rows whose encoding vector
    comes straight from the side table.
    """

    arch_id: str
    device: DeviceId
    energy: float
    arch: DetectorArchitecture | None = None


class EnergyDataset:
    """Immutable record list plus a row-aligned encoding matrix."""

    def __init__(
        self,
        records: Sequence[EnergyRecord],
        encodings: np.ndarray,
        registry: DeviceRegistry,
        normalized: bool = False,
        total_candidates: int | None = None,
    ):
        records = tuple(records)
        encodings = np.ascontiguousarray(encodings, dtype=np.float64)
        if encodings.ndim != 2 or encodings.shape[0] != len(records):
            raise ValueError("encodings must be one row per record")
        for r in records:
            if r.device not in registry:
                raise ValueError(f"record device {r.device.name!r} is not in the registry")
            if not np.isfinite(r.energy):
                raise ValueError(f"non-finite energy for {r.arch_id!r} on {r.device.name!r}")
        encodings.setflags(write=False)
        self.records = records
        self.encodings = encodings
        self.registry = registry
        self.normalized = bool(normalized)
        self.total_candidates = total_candidates

    def __len__(self) -> int:
        return len(self.records)

    @property
    def encoding_dim(self) -> int:
        return self.encodings.shape[1]

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def device_rows(self, dev: DeviceId) -> np.ndarray:
        return np.array(
            [i for i, r in enumerate(self.records) if r.device == dev], dtype=np.int64
        )

    def device_count(self, dev: DeviceId) -> int:
        return len(self.device_rows(dev))

    def devices_present(self) -> list[DeviceId]:
        seen: dict[str, DeviceId] = {}
        for r in self.records:
            seen.setdefault(r.device.name, r.device)
        return [seen[n] for n in self.registry.names if n in seen]

    def subset(self, rows: Sequence[int]) -> "EnergyDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return EnergyDataset(
            [self.records[i] for i in rows],
            self.encodings[rows],
            self.registry,
            normalized=self.normalized,
            total_candidates=self.total_candidates,
        )

    def __eq__(self, other) -> bool:
        # total_candidates is advisory metadata (not part of the on-disk form)
        return (
            isinstance(other, EnergyDataset)
            and self.records == other.records
            and np.array_equal(self.encodings, other.encodings)
            and self.registry == other.registry
            and self.normalized == other.normalized
        )


# ---------------------------------------------------------------------------
# Serialization.


def _format_float(x: float) -> str:
    return repr(float(x))


def dataset_csv_text(ds: EnergyDataset) -> str:
    lines = [ENERGY_CSV_HEADER]
    for r in ds.records:
        lines.append(f"{r.arch_id},{r.device.name},{_format_float(r.energy)}")
    return "\n".join(lines) + "\n"


def dataset_archs_json_text(ds: EnergyDataset) -> str:
    by_id: dict[str, object] = {}
    for i, r in enumerate(ds.records):
        if r.arch_id in by_id:
            continue
        if r.arch is not None:
            by_id[r.arch_id] = arch_space.architecture_to_json_dict(r.arch)
        else:
            by_id[r.arch_id] = [float(v) for v in ds.encodings[i]]
    return json.dumps(by_id, indent=2, sort_keys=True) + "\n"


def write_dataset(ds: EnergyDataset, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "energy_csv": out_dir / "energy.csv",
        "archs_json": out_dir / "archs.json",
        "registry_json": out_dir / "registry.json",
    }
    paths["energy_csv"].write_text(dataset_csv_text(ds), encoding="utf-8")
    paths["archs_json"].write_text(dataset_archs_json_text(ds), encoding="utf-8")
    save_registry(ds.registry, paths["registry_json"])
    return paths


def dataset_hash(ds: EnergyDataset) -> str:
    """sha256 of the canonical on-disk form (csv + archs + registry)."""
    h = hashlib.sha256()
    h.update(dataset_csv_text(ds).encode("utf-8"))
    h.update(dataset_archs_json_text(ds).encode("utf-8"))
    h.update(json.dumps(list(ds.registry.names)).encode("utf-8"))
    return h.hexdigest()


def load_dataset(
    path: str | Path,
    registry: DeviceRegistry | None = None,
    normalized: bool = False,
    total_candidates: int | None = None,
) -> EnergyDataset:
    """Load a dataset bundle from a directory or from the energy.csv path.

    archs.json and registry.json are taken as siblings of the CSV. Malformed
    rows, unknown devices, unknown arch ids, and duplicate (arch, device)
    pairs raise DataError.
    """
    path = Path(path)
    csv_path = path / "energy.csv" if path.is_dir() else path
    if not csv_path.is_file():
        raise DataError(f"no such dataset file: {csv_path}")
    base = csv_path.parent
    if registry is None:
        reg_path = base / "registry.json"
        if not reg_path.is_file():
            raise DataError(f"no registry given and {reg_path} does not exist")
        registry = load_registry(reg_path)
    archs_path = base / "archs.json"
    if not archs_path.is_file():
        raise DataError(f"missing architecture side table: {archs_path}")
    try:
        side_table = json.loads(archs_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{archs_path}: invalid JSON: {e}") from e

    decoded: dict[str, tuple[DetectorArchitecture | None, np.ndarray]] = {}
    for arch_id, payload in side_table.items():
        if isinstance(payload, dict):
            arch = arch_space.architecture_from_json_dict(payload)
            decoded[arch_id] = (arch, arch_space.encode_architecture(arch))
        elif isinstance(payload, list):
            decoded[arch_id] = (None, np.asarray(payload, dtype=float))
        else:
            raise DataError(f"{archs_path}: entry {arch_id!r} must be an object or a vector")

    records: list[EnergyRecord] = []
    encodings: list[np.ndarray] = []
    seen: set[tuple[str, str]] = set()
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != ENERGY_CSV_HEADER:
        raise DataError(f"{csv_path}: expected header {ENERGY_CSV_HEADER!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{csv_path}: line {lineno}: expected 3 columns, got {len(parts)}")
        arch_id, device_name, energy_text = (p.strip() for p in parts)
        try:
            device = registry.device(device_name)
        except KeyError:
            raise DataError(
                f"{csv_path}: line {lineno}: unknown device {device_name!r}"
            ) from None
        try:
            energy = float(energy_text)
        except ValueError:
            raise DataError(
                f"{csv_path}: line {lineno}: bad energy value {energy_text!r}"
            ) from None
        if arch_id not in decoded:
            raise DataError(f"{csv_path}: line {lineno}: arch id {arch_id!r} not in archs.json")
        if (arch_id, device_name) in seen:
            raise DataError(
                f"{csv_path}: line {lineno}: duplicate row for ({arch_id!r}, {device_name!r})"
            )
        seen.add((arch_id, device_name))
        arch, enc = decoded[arch_id]
        records.append(EnergyRecord(arch_id, device, energy, arch))
        encodings.append(enc)
    if not records:
        raise DataError(f"{csv_path}: dataset has no rows")
    dims = {e.shape for e in encodings}
    if len(dims) != 1:
        raise DataError(f"{csv_path}: inconsistent encoding dimensions {sorted(dims)}")
    return EnergyDataset(
        records,
        np.vstack(encodings),
        registry,
        normalized=normalized,
        total_candidates=total_candidates,
    )


def load_energy_csv(
    path: str | Path,
    registry: DeviceRegistry | None = None,
    normalized: bool = False,
    total_candidates: int | None = None,
) -> EnergyDataset:
    """Alias of load_dataset taking the energy.csv path (side files adjacent)."""
    return load_dataset(path, registry, normalized, total_candidates)


# ---------------------------------------------------------------------------
# Synthetic oracles with known ground truth.


class OracleFamily(Enum):
    CONSTANT_OFFSET = "constant_offset"
    DEVICE_SCALE = "device_scale"
    NONLINEAR_MIX = "nonlinear_mix"


@dataclass(frozen=True)
class SyntheticOracleConfig:
    """Defines energy(a, h) from the normalized analytic cost g(a) in [0, 1].

    constant_offset: g + c_h;  device_scale: s_h * g;
    nonlinear_mix:   g + c_h + beta_h * g**2 (device_params holds (c, beta)).
    """

    family: OracleFamily
    device_params: Mapping[str, float | tuple[float, float]]
    noise_sd: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    def truth(self, g: np.ndarray, device_name: str) -> np.ndarray:
        """Noiseless energy for normalized costs g on one device."""
        p = self.device_params[device_name]
        if self.family is OracleFamily.CONSTANT_OFFSET:
            return g + float(p)
        if self.family is OracleFamily.DEVICE_SCALE:
            return float(p) * g
        c, beta = (float(p[0]), float(p[1])) if isinstance(p, (tuple, list)) else (float(p), 0.5)
        return g + c + beta * g**2


def generate_synthetic(
    cfg: SyntheticOracleConfig,
    archs: Sequence[DetectorArchitecture],
    devices: Sequence[str],
) -> EnergyDataset:
    """Deterministic dataset with rows (arch-major) for every (arch, device)."""
    if not archs or not devices:
        raise ValueError("need at least one architecture and one device")
    missing = [d for d in devices if d not in cfg.device_params]
    if missing:
        raise ValueError(f"device_params missing entries for {missing}")
    registry = DeviceRegistry(devices)
    idx = np.array([arch_space.architecture_indices(a) for a in archs], dtype=np.int64)
    g = arch_space.normalized_costs_batch(idx)
    arch_encodings = arch_space.indices_to_encodings(idx)

    rng = np.random.default_rng(cfg.rng_seed)
    noise = rng.normal(0.0, cfg.noise_sd, size=(len(archs), len(devices))) if cfg.noise_sd else None

    records: list[EnergyRecord] = []
    rows: list[np.ndarray] = []
    width = max(5, len(str(len(archs) - 1)))
    truths = {name: cfg.truth(g, name) for name in registry.names}
    for i, arch in enumerate(archs):
        arch_id = f"a{i:0{width}d}"
        for j, dev in enumerate(registry):
            energy = float(truths[dev.name][i])
            if noise is not None:
                energy += float(noise[i, j])
            records.append(EnergyRecord(arch_id, dev, energy, arch))
            rows.append(arch_encodings[i])
    return EnergyDataset(
        records, np.vstack(rows), registry, normalized=False, total_candidates=len(archs)
    )


def oracle_sidecar_dict(cfg: SyntheticOracleConfig, n_archs: int, arch_seed: int) -> dict:
    """Ground-truth description written next to synthetic datasets."""
    lo, hi = arch_space.cost_bounds()
    return {
        "family": cfg.family.value,
        "device_params": {
            k: (list(v) if isinstance(v, (tuple, list)) else float(v))
            for k, v in cfg.device_params.items()
        },
        "noise_sd": cfg.noise_sd,
        "rng_seed": cfg.rng_seed,
        "arch_sample_seed": arch_seed,
        "n_architectures": n_archs,
        "cost_normalization": {"min_total_cost": lo, "max_total_cost": hi},
    }


# ---------------------------------------------------------------------------
# Few-shot splits.


@dataclass(frozen=True)
class FewShotSplit:
    """n_target measured rows on the target device; the rest held out."""

    n_target: int
    target_train: EnergyDataset
    target_test: EnergyDataset
    source_pool: EnergyDataset
    rng_seed: int


def split_fewshot(
    ds: EnergyDataset, target: DeviceId, n_target: int, seed: int
) -> FewShotSplit:
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    target_rows = ds.device_rows(target)
    if len(target_rows) == 0:
        raise ValueError(f"dataset has no rows for device {target.name!r}")
    if n_target >= len(target_rows):
        raise ValueError(
            f"n_target={n_target} leaves no test rows (device {target.name!r} "
            f"has {len(target_rows)} rows; the test set must be nonempty)"
        )
    rng = np.random.default_rng(seed)
    perm = target_rows[rng.permutation(len(target_rows))]
    source_rows = np.array(
        [i for i, r in enumerate(ds.records) if r.device != target], dtype=np.int64
    )
    return FewShotSplit(
        n_target=n_target,
        target_train=ds.subset(perm[:n_target]),
        target_test=ds.subset(perm[n_target:]),
        source_pool=ds.subset(source_rows),
        rng_seed=seed,
    )
