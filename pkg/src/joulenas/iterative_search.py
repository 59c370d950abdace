"""Budget-constrained coordinate search over backbone, FPN, and PAN.

Each step enumerates one stage (the other two held fixed), keeps candidates
whose estimated energy fits the budget, and picks the best proxy score with
deterministic tie-breaking (higher score, then lower energy, then canonical
order). If nothing fits, the minimum-energy candidate is taken and flagged
infeasible so the search keeps moving toward the budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arch_space, mlp_core
from .arch_space import (
    BLOCK_ONEHOT,
    DetectorArchitecture,
    SLOTS_PER_BLOCK,
    StageArchitecture,
    StageKind,
)
from .devices import DeviceId
from .energy_estimator import (
    JointEstimator,
    TwoStageEstimator,
    predict_batch,
    predict_joint_batch,
)
from .mlp_core import Network
from .seeds import derive_seed

STAGE_ORDER = (StageKind.BACKBONE, StageKind.FPN, StageKind.PAN)


@dataclass(frozen=True)
class SearchConfig:
    device: DeviceId
    budget_tau: float = math.inf
    max_iterations: int = 4
    stage_enumeration_limit: int = 1 << 20
    sample_fallback: int = 4096
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.budget_tau > 0:
            raise ValueError("budget_tau must be > 0 (math.inf for unconstrained)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stage_enumeration_limit < 1 or self.sample_fallback < 1:
            raise ValueError("enumeration limit and sample fallback must be >= 1")


@dataclass(frozen=True)
class StageStep:
    iteration: int
    stage: StageKind
    chosen: StageArchitecture
    score: float
    energy: float
    feasible: bool


@dataclass
class SearchState:
    current: DetectorArchitecture
    iteration: int = 0
    history: list[StageStep] = field(default_factory=list)


@dataclass(frozen=True)
class SearchResult:
    architecture: DetectorArchitecture
    proxy_map: float
    energy: float
    feasible: bool
    converged_at: int | None


def _energy_batch(energy, encodings: np.ndarray, device: DeviceId) -> np.ndarray:
    if isinstance(energy, TwoStageEstimator):
        return predict_batch(energy, encodings, device)
    if isinstance(energy, JointEstimator):
        return predict_joint_batch(energy, encodings, device)
    raise TypeError(f"unsupported energy estimator type: {type(energy).__name__}")


def _stage_candidates(
    current: DetectorArchitecture, stage: StageKind, cfg: SearchConfig, iteration: int
) -> np.ndarray:
    """(N, n_blocks) block-index matrix for the stage's candidate set."""
    size = arch_space.stage_space_size(stage)
    if size <= cfg.stage_enumeration_limit:
        return arch_space.stage_index_matrix(stage)
    # Sampled fallback; the incumbent stays in the candidate set so a step
    # can never make the architecture worse.
    n_blocks = arch_space.STAGE_BLOCK_COUNTS[stage]
    rng = np.random.default_rng(derive_seed(cfg.rng_seed, "stage-sample", iteration, stage.value))
    sampled = rng.integers(0, arch_space.NUM_BLOCK_CHOICES, size=(cfg.sample_fallback, n_blocks))
    lo, hi = arch_space.STAGE_BLOCK_RANGE[stage]
    incumbent = arch_space.architecture_indices(current)[lo:hi]
    return np.vstack([incumbent[None, :], sampled]).astype(np.int64)


def _candidate_encodings(
    current: DetectorArchitecture, stage: StageKind, idx: np.ndarray
) -> np.ndarray:
    enc = np.tile(arch_space.encode_architecture(current), (idx.shape[0], 1))
    stage_enc = BLOCK_ONEHOT[idx].reshape(idx.shape[0], idx.shape[1] * SLOTS_PER_BLOCK)
    enc[:, arch_space.STAGE_ENCODING_SLICE[stage]] = stage_enc
    return enc


def _select(scores: np.ndarray, energies: np.ndarray, tau: float) -> tuple[int, bool]:
    """Index of the winning candidate and whether it fits the budget."""
    feasible = energies <= tau
    if feasible.any():
        rows = np.flatnonzero(feasible)
        order = np.lexsort((rows, energies[rows], -scores[rows]))
        return int(rows[order[0]]), True
    order = np.lexsort((np.arange(len(energies)), energies))
    return int(order[0]), False


def stage_argmax(
    state: SearchState,
    stage: StageKind,
    map_proxy: Network,
    energy,
    cfg: SearchConfig,
) -> SearchState:
    """Replace one stage with the best feasible candidate, others held fixed."""
    idx = _stage_candidates(state.current, stage, cfg, state.iteration)
    enc = _candidate_encodings(state.current, stage, idx)
    scores = mlp_core.forward_batch(map_proxy, enc)
    energies = _energy_batch(energy, enc, cfg.device)
    k, feasible = _select(scores, energies, cfg.budget_tau)

    chosen = StageArchitecture(
        stage, tuple(arch_space.BLOCK_CHOICES[int(i)] for i in idx[k])
    )
    step = StageStep(
        iteration=state.iteration,
        stage=stage,
        chosen=chosen,
        score=float(scores[k]),
        energy=float(energies[k]),
        feasible=feasible,
    )
    return SearchState(
        current=state.current.replace_stage(chosen),
        iteration=state.iteration,
        history=state.history + [step],
    )


def run_search(
    init: DetectorArchitecture,
    map_proxy: Network,
    energy,
    cfg: SearchConfig,
) -> tuple[SearchResult, SearchState]:
    """Iterate backbone -> FPN -> PAN until converged or max_iterations."""
    state = SearchState(current=init)
    converged_at: int | None = None
    for it in range(1, cfg.max_iterations + 1):
        state.iteration = it
        before = state.current
        for stage in STAGE_ORDER:
            state = stage_argmax(state, stage, map_proxy, energy, cfg)
        if state.current == before:
            converged_at = it
            break
    last = state.history[-1]
    result = SearchResult(
        architecture=state.current,
        proxy_map=last.score,
        energy=last.energy,
        feasible=bool(last.energy <= cfg.budget_tau),
        converged_at=converged_at,
    )
    return result, state


def search(
    init: DetectorArchitecture, map_proxy: Network, energy, cfg: SearchConfig
) -> SearchResult:
    result, _ = run_search(init, map_proxy, energy, cfg)
    return result


@dataclass(frozen=True)
class OptimalityViolation:
    stage: StageKind
    candidate: StageArchitecture
    score: float
    energy: float
    feasible: bool


@dataclass(frozen=True)
class OptimalityReport:
    passed: bool
    violations: tuple[OptimalityViolation, ...]
    candidates_checked: int

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "candidates_checked": self.candidates_checked,
            "violations": [
                {
                    "stage": v.stage.value,
                    "candidate": [arch_space.block_to_json(b) for b in v.candidate.blocks],
                    "score": v.score,
                    "energy": v.energy,
                    "feasible": v.feasible,
                }
                for v in self.violations
            ],
        }


def local_optimality_check(
    result: SearchResult, map_proxy: Network, energy, cfg: SearchConfig
) -> OptimalityReport:
    """Verify no single-stage replacement beats the result under the tie-break.

    For a feasible result a violation is a feasible candidate with a strictly
    better (score, -energy) pair; for an infeasible result any feasible or
    strictly cheaper candidate counts. Stages are scanned exhaustively.
    """
    violations: list[OptimalityViolation] = []
    checked = 0
    arch = result.architecture
    for stage in STAGE_ORDER:
        idx = arch_space.stage_index_matrix(stage)
        enc = _candidate_encodings(arch, stage, idx)
        scores = mlp_core.forward_batch(map_proxy, enc)
        energies = _energy_batch(energy, enc, cfg.device)
        checked += len(idx)

        lo, hi = arch_space.STAGE_BLOCK_RANGE[stage]
        cur = arch_space.architecture_indices(arch)[lo:hi]
        powers = arch_space.NUM_BLOCK_CHOICES ** np.arange(len(cur) - 1, -1, -1)
        cur_flat = int((cur * powers).sum())
        cur_score, cur_energy = scores[cur_flat], energies[cur_flat]

        feasible = energies <= cfg.budget_tau
        if result.feasible:
            better = feasible & (
                (scores > cur_score) | ((scores == cur_score) & (energies < cur_energy))
            )
        else:
            better = feasible | (energies < cur_energy)
        for j in np.flatnonzero(better):
            violations.append(
                OptimalityViolation(
                    stage=stage,
                    candidate=StageArchitecture(
                        stage, tuple(arch_space.BLOCK_CHOICES[int(i)] for i in idx[j])
                    ),
                    score=float(scores[j]),
                    energy=float(energies[j]),
                    feasible=bool(feasible[j]),
                )
            )
    return OptimalityReport(
        passed=not violations, violations=tuple(violations), candidates_checked=checked
    )


def trace_lines(state: SearchState) -> list[str]:
    lines = []
    for step in state.history:
        lines.append(
            json.dumps(
                {
                    "iteration": step.iteration,
                    "stage": step.stage.value,
                    "chosen": [arch_space.block_to_json(b) for b in step.chosen.blocks],
                    "score": step.score,
                    "energy": step.energy,
                    "feasible": step.feasible,
                },
                sort_keys=True,
            )
        )
    return lines


def write_trace_jsonl(state: SearchState, path: str | Path) -> None:
    Path(path).write_text("\n".join(trace_lines(state)) + "\n", encoding="utf-8")
