"""Elastic detector search space: block choices, encodings, sampling, costs, scaling.

A candidate detector is three stages (backbone, FPN, PAN) of elastic blocks.
Each block picks a channel-compression ratio, a kernel size, and a lite or
full attention variant. The module also provides an analytic per-block cost
used as a synthetic energy surrogate, and the compound-scaling operator that
derives nano/small/medium deployment variants from a searched base design.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

RATIOS: tuple[float, ...] = (0.25, 0.5, 1.0)
KERNELS: tuple[int, ...] = (1, 3, 5)


class Attention(Enum):
    LITE = "lite"
    FULL = "full"


ATTENTIONS: tuple[Attention, ...] = (Attention.LITE, Attention.FULL)


@dataclass(frozen=True)
class BlockChoice:
    """One elastic block configuration (ratio, kernel, attention)."""

    ratio: float
    kernel: int
    attention: Attention

    def __post_init__(self) -> None:
        if self.ratio not in RATIOS:
            raise ValueError(f"ratio must be one of {RATIOS}, got {self.ratio!r}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if not isinstance(self.attention, Attention):
            raise ValueError(f"attention must be an Attention value, got {self.attention!r}")


# Canonical order: ratio ascending, then kernel ascending, then lite before full.
BLOCK_CHOICES: tuple[BlockChoice, ...] = tuple(
    BlockChoice(r, k, t) for r, k, t in itertools.product(RATIOS, KERNELS, ATTENTIONS)
)
NUM_BLOCK_CHOICES = len(BLOCK_CHOICES)  # 18

_CHOICE_INDEX: dict[BlockChoice, int] = {b: i for i, b in enumerate(BLOCK_CHOICES)}


def enumerate_block_choices() -> list[BlockChoice]:
    """All 18 block choices in canonical order (stable across runs)."""
    return list(BLOCK_CHOICES)


def block_index(b: BlockChoice) -> int:
    return _CHOICE_INDEX[b]


class StageKind(Enum):
    BACKBONE = "backbone"
    FPN = "fpn"
    PAN = "pan"


STAGE_BLOCK_COUNTS: dict[StageKind, int] = {
    StageKind.BACKBONE: 2,
    StageKind.FPN: 4,
    StageKind.PAN: 4,
}
NUM_BLOCKS = sum(STAGE_BLOCK_COUNTS.values())  # 10 searchable blocks

# Position of each stage's blocks inside the flat 10-block sequence.
STAGE_BLOCK_RANGE: dict[StageKind, tuple[int, int]] = {
    StageKind.BACKBONE: (0, 2),
    StageKind.FPN: (2, 6),
    StageKind.PAN: (6, 10),
}


@dataclass(frozen=True)
class StageArchitecture:
    kind: StageKind
    blocks: tuple[BlockChoice, ...]

    def __post_init__(self) -> None:
        expected = STAGE_BLOCK_COUNTS[self.kind]
        if len(self.blocks) != expected:
            raise ValueError(
                f"{self.kind.value} stage needs {expected} blocks, got {len(self.blocks)}"
            )


@dataclass(frozen=True)
class DetectorArchitecture:
    """Full candidate detector: backbone + FPN + PAN block choices."""

    backbone: StageArchitecture
    fpn: StageArchitecture
    pan: StageArchitecture

    def __post_init__(self) -> None:
        for field_name, stage, kind in (
            ("backbone", self.backbone, StageKind.BACKBONE),
            ("fpn", self.fpn, StageKind.FPN),
            ("pan", self.pan, StageKind.PAN),
        ):
            if stage.kind is not kind:
                raise ValueError(f"{field_name} field holds a {stage.kind.value} stage")

    @property
    def blocks(self) -> tuple[BlockChoice, ...]:
        return self.backbone.blocks + self.fpn.blocks + self.pan.blocks

    def stage(self, kind: StageKind) -> StageArchitecture:
        return {StageKind.BACKBONE: self.backbone, StageKind.FPN: self.fpn, StageKind.PAN: self.pan}[kind]

    def replace_stage(self, stage: StageArchitecture) -> "DetectorArchitecture":
        parts = {k: self.stage(k) for k in StageKind}
        parts[stage.kind] = stage
        return DetectorArchitecture(
            backbone=parts[StageKind.BACKBONE],
            fpn=parts[StageKind.FPN],
            pan=parts[StageKind.PAN],
        )


def architecture_from_blocks(blocks: Sequence[BlockChoice]) -> DetectorArchitecture:
    if len(blocks) != NUM_BLOCKS:
        raise ValueError(f"need {NUM_BLOCKS} blocks, got {len(blocks)}")
    return DetectorArchitecture(
        backbone=StageArchitecture(StageKind.BACKBONE, tuple(blocks[0:2])),
        fpn=StageArchitecture(StageKind.FPN, tuple(blocks[2:6])),
        pan=StageArchitecture(StageKind.PAN, tuple(blocks[6:10])),
    )


def stage_space_size(kind: StageKind) -> int:
    return NUM_BLOCK_CHOICES ** STAGE_BLOCK_COUNTS[kind]


def search_space_size() -> int:
    return math.prod(stage_space_size(k) for k in StageKind)


def enumerate_stage(kind: StageKind) -> Iterator[StageArchitecture]:
    """Every stage configuration in canonical (lexicographic) order."""
    for combo in itertools.product(BLOCK_CHOICES, repeat=STAGE_BLOCK_COUNTS[kind]):
        yield StageArchitecture(kind, combo)


def stage_index_matrix(kind: StageKind) -> np.ndarray:
    """(18**n, n) matrix of block-choice indices in canonical order."""
    n = STAGE_BLOCK_COUNTS[kind]
    return np.indices((NUM_BLOCK_CHOICES,) * n).reshape(n, -1).T.astype(np.int64)


# ---------------------------------------------------------------------------
# One-hot encoding: per block 3 ratio + 3 kernel + 2 attention slots.

SLOTS_PER_BLOCK = len(RATIOS) + len(KERNELS) + len(ATTENTIONS)  # 8
ENCODING_LENGTH = NUM_BLOCKS * SLOTS_PER_BLOCK  # 80

# Slice of the encoding covered by each stage (blocks are contiguous).
STAGE_ENCODING_SLICE: dict[StageKind, slice] = {
    k: slice(lo * SLOTS_PER_BLOCK, hi * SLOTS_PER_BLOCK) for k, (lo, hi) in STAGE_BLOCK_RANGE.items()
}


def _block_onehot_table() -> np.ndarray:
    table = np.zeros((NUM_BLOCK_CHOICES, SLOTS_PER_BLOCK))
    for i, b in enumerate(BLOCK_CHOICES):
        table[i, RATIOS.index(b.ratio)] = 1.0
        table[i, len(RATIOS) + KERNELS.index(b.kernel)] = 1.0
        table[i, len(RATIOS) + len(KERNELS) + ATTENTIONS.index(b.attention)] = 1.0
    return table


BLOCK_ONEHOT: np.ndarray = _block_onehot_table()
BLOCK_ONEHOT.setflags(write=False)


def architecture_indices(a: DetectorArchitecture) -> np.ndarray:
    return np.array([block_index(b) for b in a.blocks], dtype=np.int64)


def architecture_from_indices(idx: Sequence[int]) -> DetectorArchitecture:
    return architecture_from_blocks([BLOCK_CHOICES[int(i)] for i in idx])


def encode_architecture(a: DetectorArchitecture) -> np.ndarray:
    """Length-80 one-hot encoding; exactly 30 entries are 1.0."""
    return BLOCK_ONEHOT[architecture_indices(a)].reshape(ENCODING_LENGTH).copy()


def encode_architectures(archs: Sequence[DetectorArchitecture]) -> np.ndarray:
    idx = np.array([architecture_indices(a) for a in archs], dtype=np.int64)
    return indices_to_encodings(idx)


def indices_to_encodings(idx: np.ndarray) -> np.ndarray:
    """(n, 10) index matrix -> (n, 80) encoding matrix."""
    n = idx.shape[0]
    return BLOCK_ONEHOT[idx].reshape(n, idx.shape[1] * SLOTS_PER_BLOCK)


def decode_architecture(vec: np.ndarray) -> DetectorArchitecture:
    """Invert encode_architecture; rejects anything that is not an exact one-hot."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (ENCODING_LENGTH,):
        raise ValueError(f"encoding must have shape ({ENCODING_LENGTH},), got {vec.shape}")
    blocks = []
    for p in range(NUM_BLOCKS):
        group = vec[p * SLOTS_PER_BLOCK : (p + 1) * SLOTS_PER_BLOCK]
        r = _onehot_pick(group[0:3], f"block {p} ratio")
        k = _onehot_pick(group[3:6], f"block {p} kernel")
        t = _onehot_pick(group[6:8], f"block {p} attention")
        blocks.append(BlockChoice(RATIOS[r], KERNELS[k], ATTENTIONS[t]))
    return architecture_from_blocks(blocks)


def _onehot_pick(group: np.ndarray, what: str) -> int:
    hot = np.flatnonzero(group == 1.0)
    if len(hot) != 1 or not np.all((group == 0.0) | (group == 1.0)):
        raise ValueError(f"invalid one-hot group for {what}: {group.tolist()}")
    return int(hot[0])


def sample_uniform(rng_seed: int, n: int) -> list[DetectorArchitecture]:
    """n architectures with each block slot drawn independently and uniformly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, NUM_BLOCK_CHOICES, size=(n, NUM_BLOCKS))
    return [architecture_from_indices(row) for row in idx]


# ---------------------------------------------------------------------------
# Analytic block cost. Synthetic-oracle plumbing: only the monotonicities are
# contractual (kernel up => cost up, ratio down => cost up, full > lite).

ATTENTION_COST_MULT: dict[Attention, float] = {Attention.LITE: 1.0, Attention.FULL: 1.25}

DEFAULT_REFERENCE_CHANNELS: dict[StageKind, tuple[int, ...]] = {
    StageKind.BACKBONE: (128, 256),
    StageKind.FPN: (64, 128, 128, 256),
    StageKind.PAN: (64, 128, 128, 256),
}
DEFAULT_REFERENCE_REPEATS: dict[StageKind, tuple[int, ...]] = {
    k: (1,) * n for k, n in STAGE_BLOCK_COUNTS.items()
}
CHANNEL_GRANULARITY = 8


def analytic_block_cost(b: BlockChoice, channels: int) -> float:
    """Dimensionless cost score for one block at a given channel width."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return float(channels) ** 2 * (1.0 / b.ratio) * float(b.kernel) ** 2 * ATTENTION_COST_MULT[b.attention]


def flat_reference_channels(table: Mapping[StageKind, tuple[int, ...]] | None = None) -> tuple[int, ...]:
    table = table or DEFAULT_REFERENCE_CHANNELS
    return tuple(c for k in (StageKind.BACKBONE, StageKind.FPN, StageKind.PAN) for c in table[k])


def flat_reference_repeats(table: Mapping[StageKind, tuple[int, ...]] | None = None) -> tuple[int, ...]:
    table = table or DEFAULT_REFERENCE_REPEATS
    return tuple(r for k in (StageKind.BACKBONE, StageKind.FPN, StageKind.PAN) for r in table[k])


def slot_cost_table(
    channels: Sequence[int] | None = None, repeats: Sequence[int] | None = None
) -> np.ndarray:
    """(10, 18) table: cost of placing each block choice at each slot."""
    channels = channels or flat_reference_channels()
    repeats = repeats or flat_reference_repeats()
    table = np.empty((NUM_BLOCKS, NUM_BLOCK_CHOICES))
    for p in range(NUM_BLOCKS):
        for i, b in enumerate(BLOCK_CHOICES):
            table[p, i] = analytic_block_cost(b, channels[p]) * repeats[p]
    return table


def architecture_cost(
    a: DetectorArchitecture,
    channels: Sequence[int] | None = None,
    repeats: Sequence[int] | None = None,
) -> float:
    """Total analytic cost: sum of per-block costs (separable by construction)."""
    channels = channels or flat_reference_channels()
    repeats = repeats or flat_reference_repeats()
    return sum(
        analytic_block_cost(b, channels[p]) * repeats[p] for p, b in enumerate(a.blocks)
    )


def cost_bounds(
    channels: Sequence[int] | None = None, repeats: Sequence[int] | None = None
) -> tuple[float, float]:
    """Exact (min, max) total cost over the whole space, via per-slot separability."""
    table = slot_cost_table(channels, repeats)
    return float(table.min(axis=1).sum()), float(table.max(axis=1).sum())


def normalized_cost(
    a: DetectorArchitecture,
    channels: Sequence[int] | None = None,
    repeats: Sequence[int] | None = None,
) -> float:
    """Total cost mapped to [0, 1] using the exact space-wide bounds."""
    lo, hi = cost_bounds(channels, repeats)
    return (architecture_cost(a, channels, repeats) - lo) / (hi - lo)


def normalized_costs_batch(
    idx: np.ndarray,
    channels: Sequence[int] | None = None,
    repeats: Sequence[int] | None = None,
) -> np.ndarray:
    """Normalized costs for an (n, 10) index matrix."""
    table = slot_cost_table(channels, repeats)
    totals = table[np.arange(NUM_BLOCKS), idx].sum(axis=1)
    lo = table.min(axis=1).sum()
    hi = table.max(axis=1).sum()
    return (totals - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# Compound scaling.


class ScaleLabel(Enum):
    NANO = "nano"
    SMALL = "small"
    MEDIUM = "medium"


@dataclass(frozen=True)
class ScalingFactor:
    label: ScaleLabel
    width_mult: float
    depth_mult: float

    def __post_init__(self) -> None:
        if self.width_mult <= 0 or self.depth_mult <= 0:
            raise ValueError("width_mult and depth_mult must be strictly positive")


DEFAULT_SCALING_FACTORS: dict[ScaleLabel, ScalingFactor] = {
    ScaleLabel.NANO: ScalingFactor(ScaleLabel.NANO, 1.0, 1.0),
    ScaleLabel.SMALL: ScalingFactor(ScaleLabel.SMALL, 1.6, 1.33),
    ScaleLabel.MEDIUM: ScalingFactor(ScaleLabel.MEDIUM, 2.2, 1.67),
}


@dataclass(frozen=True)
class ScaledDetector:
    base: DetectorArchitecture
    factor: ScalingFactor
    derived_channels: tuple[int, ...]
    derived_repeats: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 1 or c % CHANNEL_GRANULARITY for c in self.derived_channels):
            raise ValueError("derived channels must be positive multiples of the granularity")
        if any(r < 1 for r in self.derived_repeats):
            raise ValueError("derived repeats must be >= 1")


def _round_channels(value: float, granularity: int) -> int:
    return max(granularity, granularity * int(math.floor(value / granularity + 0.5)))


def scale_architecture(
    base: DetectorArchitecture,
    factor: ScalingFactor,
    channels: Sequence[int] | None = None,
    repeats: Sequence[int] | None = None,
    granularity: int = CHANNEL_GRANULARITY,
) -> ScaledDetector:
    """Deterministic width/depth expansion; block choices are untouched."""
    channels = channels or flat_reference_channels()
    repeats = repeats or flat_reference_repeats()
    derived_channels = tuple(_round_channels(c * factor.width_mult, granularity) for c in channels)
    derived_repeats = tuple(max(1, math.ceil(r * factor.depth_mult)) for r in repeats)
    return ScaledDetector(base, factor, derived_channels, derived_repeats)


def scaled_cost(sd: ScaledDetector) -> float:
    return sum(
        analytic_block_cost(b, sd.derived_channels[p]) * sd.derived_repeats[p]
        for p, b in enumerate(sd.base.blocks)
    )


# ---------------------------------------------------------------------------
# JSON serialization. Ratios 0.25/0.5/1.0 are exactly representable, so plain
# JSON numbers round-trip them without loss.


def block_to_json(b: BlockChoice) -> list:
    return [b.ratio, b.kernel, b.attention.value]


def block_from_json(item: Sequence) -> BlockChoice:
    if len(item) != 3:
        raise ValueError(f"block entry must be [ratio, kernel, attention], got {item!r}")
    ratio, kernel, attention = item
    ratio = float(ratio)  # accepts "0.25" string form as well
    return BlockChoice(ratio, int(kernel), Attention(str(attention)))


def architecture_to_json_dict(a: DetectorArchitecture) -> dict:
    return {
        "backbone": [block_to_json(b) for b in a.backbone.blocks],
        "fpn": [block_to_json(b) for b in a.fpn.blocks],
        "pan": [block_to_json(b) for b in a.pan.blocks],
    }


def architecture_from_json_dict(d: Mapping) -> DetectorArchitecture:
    stages = {}
    for kind in StageKind:
        if kind.value not in d:
            raise ValueError(f"architecture JSON is missing the {kind.value!r} stage")
        stages[kind] = StageArchitecture(
            kind, tuple(block_from_json(item) for item in d[kind.value])
        )
    return DetectorArchitecture(
        backbone=stages[StageKind.BACKBONE], fpn=stages[StageKind.FPN], pan=stages[StageKind.PAN]
    )


def scaled_to_json_dict(sd: ScaledDetector) -> dict:
    d = architecture_to_json_dict(sd.base)
    d["factor"] = {
        "label": sd.factor.label.value,
        "width_mult": sd.factor.width_mult,
        "depth_mult": sd.factor.depth_mult,
    }
    return d


def scaled_from_json_dict(d: Mapping) -> ScaledDetector:
    """Derived channel/repeat fields are recomputed (scaling is deterministic)."""
    base = architecture_from_json_dict(d)
    f = d["factor"]
    factor = ScalingFactor(ScaleLabel(f["label"]), float(f["width_mult"]), float(f["depth_mult"]))
    return scale_architecture(base, factor)


def save_architecture(a: DetectorArchitecture | ScaledDetector, path: str | Path) -> None:
    d = scaled_to_json_dict(a) if isinstance(a, ScaledDetector) else architecture_to_json_dict(a)
    Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")


def load_architecture(path: str | Path) -> DetectorArchitecture | ScaledDetector:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "factor" in d:
        return scaled_from_json_dict(d)
    return architecture_from_json_dict(d)


DEFAULT_INIT_ARCHITECTURE = architecture_from_blocks(
    [BlockChoice(0.5, 3, Attention.LITE)] * NUM_BLOCKS
)
MAX_COST_ARCHITECTURE = architecture_from_blocks(
    [BlockChoice(0.25, 5, Attention.FULL)] * NUM_BLOCKS
)
MIN_COST_ARCHITECTURE = architecture_from_blocks(
    [BlockChoice(1.0, 1, Attention.LITE)] * NUM_BLOCKS
)
