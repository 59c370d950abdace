"""Command-line entry point: synth, fit, search, scale, bench, report.

Every run resolves its configuration (flags override the optional TOML config
file), derives all randomness from one root --seed, and writes a manifest
recording the resolved config, input hashes, and output files. Outputs are
byte-stable under fixed seeds.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal violation.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import click

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import (
    __version__,
    arch_space,
    data_io,
    energy_estimator,
    experiments,
    iterative_search,
    mlp_core,
)
from .devices import DeviceRegistry
from .errors import DataError, InternalCheckError
from .seeds import derive_seed


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    seeds: dict,
    inputs: list[Path],
    outputs: list[Path],
) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seeds": seeds,
        "inputs": {p.name: _sha256(p) for p in inputs},
        "outputs": sorted(p.name for p in outputs),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _resolve(ctx: click.Context, section: str, **values):
    """Flag > config-file section > builtin default."""
    file_cfg = ctx.obj.get("file_config", {}).get(section, {})
    out = {}
    for name, val in values.items():
        src = ctx.get_parameter_source(name)
        if src is not None and src.name == "COMMANDLINE":
            out[name] = val
        elif name in file_cfg:
            out[name] = file_cfg[name]
        else:
            out[name] = val
    return out


def _out_dir(ctx: click.Context) -> Path:
    out = Path(ctx.obj["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed for the run.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel workers where supported.")
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("."), show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), default=None,
              help="TOML config file; flags override its values.")
@click.pass_context
def cli(ctx, seed, workers, out_dir, config_path):
    """Energy-budgeted detector architecture search toolkit."""
    file_config = {}
    if config_path is not None:
        file_config = tomllib.loads(Path(config_path).read_text(encoding="utf-8"))
    ctx.obj = {
        "seed": seed,
        "workers": workers,
        "out_dir": out_dir,
        "file_config": file_config,
    }


# ---------------------------------------------------------------------------


def _parse_device_params(family: data_io.OracleFamily, text: str | None, devices: list[str]):
    defaults = {
        data_io.OracleFamily.CONSTANT_OFFSET: "0.0,0.35,0.8",
        data_io.OracleFamily.DEVICE_SCALE: "1.0,1.35,1.8",
        data_io.OracleFamily.NONLINEAR_MIX: "0.0:0.3,0.35:0.5,0.8:0.2",
    }
    text = text or defaults[family]
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) != len(devices):
        raise click.BadParameter(
            f"--device-params has {len(parts)} entries for {len(devices)} devices"
        )
    params = {}
    for name, part in zip(devices, parts):
        if ":" in part:
            c, beta = part.split(":", 1)
            params[name] = (float(c), float(beta))
        else:
            params[name] = float(part)
    return params


@cli.command()
@click.option("--family", type=click.Choice([f.value for f in data_io.OracleFamily]),
              default=data_io.OracleFamily.CONSTANT_OFFSET.value, show_default=True)
@click.option("--devices", default="cpu,gpu,npu", show_default=True,
              help="Comma-separated device names.")
@click.option("--device-params", "device_params", default=None,
              help="Per-device oracle parameters (comma list; c:beta pairs for nonlinear_mix).")
@click.option("--archs", "n_archs", type=int, default=500, show_default=True)
@click.option("--noise-sd", type=float, default=0.01, show_default=True)
@click.option("--emit-proxy/--no-emit-proxy", default=False, show_default=True,
              help="Also write a seeded synthetic accuracy proxy checkpoint.")
@click.pass_context
def synth(ctx, family, devices, device_params, n_archs, noise_sd, emit_proxy):
    """Generate a synthetic energy dataset bundle with a known ground truth."""
    vals = _resolve(ctx, "synth", family=family, devices=devices,
                    device_params=device_params, n_archs=n_archs, noise_sd=noise_sd,
                    emit_proxy=emit_proxy)
    family = data_io.OracleFamily(vals["family"])
    device_names = [d.strip() for d in str(vals["devices"]).split(",") if d.strip()]
    if not device_names:
        raise click.BadParameter("--devices must list at least one device")
    if int(vals["n_archs"]) < 1:
        raise click.BadParameter("--archs must be >= 1")
    params = _parse_device_params(family, vals["device_params"], device_names)

    root = ctx.obj["seed"]
    arch_seed = derive_seed(root, "synth-archs")
    oracle = data_io.SyntheticOracleConfig(
        family=family,
        device_params=params,
        noise_sd=float(vals["noise_sd"]),
        rng_seed=derive_seed(root, "synth-noise"),
    )
    archs = arch_space.sample_uniform(arch_seed, int(vals["n_archs"]))
    ds = data_io.generate_synthetic(oracle, archs, device_names)

    out = _out_dir(ctx)
    paths = data_io.write_dataset(ds, out)
    truth_path = out / "truth.json"
    truth_path.write_text(
        json.dumps(data_io.oracle_sidecar_dict(oracle, len(archs), arch_seed),
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    outputs = list(paths.values()) + [truth_path]
    if vals["emit_proxy"]:
        proxy = mlp_core.init_network((arch_space.ENCODING_LENGTH, 1), derive_seed(root, "synth-proxy"))
        proxy_path = out / "proxy.json"
        mlp_core.save_network(proxy, proxy_path)
        outputs.append(proxy_path)

    config = {k: (v if not isinstance(v, bool) else bool(v)) for k, v in vals.items()}
    config["family"] = family.value
    _write_manifest(out, "synth", config,
                    {"root": root, "arch_sample": arch_seed, "noise": oracle.rng_seed},
                    [], outputs)
    click.echo(f"wrote {len(ds)} energy rows to {out}")


# ---------------------------------------------------------------------------


def _dataset_input_paths(data_dir: Path) -> list[Path]:
    return [data_dir / "energy.csv", data_dir / "archs.json", data_dir / "registry.json"]


@cli.command()
@click.option("--data", "data_dir", type=click.Path(path_type=Path, exists=True), required=True,
              help="Dataset bundle directory (energy.csv + archs.json + registry.json).")
@click.option("--target", required=True, help="Target device name.")
@click.option("--n-target", type=int, default=10, show_default=True)
@click.option("--model", type=click.Choice(["two_stage", "joint"]), default="two_stage",
              show_default=True)
@click.option("--hidden", type=int, default=energy_estimator.DEFAULT_HIDDEN_SIZE, show_default=True)
@click.option("--pretrain-epochs", type=int, default=experiments.DEFAULT_PRETRAIN_CONFIG.epochs,
              show_default=True)
@click.option("--pretrain-lr", type=float, default=experiments.DEFAULT_PRETRAIN_CONFIG.learning_rate,
              show_default=True)
@click.option("--adapt-epochs", type=int, default=energy_estimator.DEFAULT_ADAPT_CONFIG.epochs,
              show_default=True)
@click.option("--adapt-lr", type=float, default=energy_estimator.DEFAULT_ADAPT_CONFIG.learning_rate,
              show_default=True)
@click.pass_context
def fit(ctx, data_dir, target, n_target, model, hidden, pretrain_epochs, pretrain_lr,
        adapt_epochs, adapt_lr):
    """Pretrain on source devices and adapt to the target with n few-shot samples."""
    vals = _resolve(ctx, "fit", target=target, n_target=n_target, model=model, hidden=hidden,
                    pretrain_epochs=pretrain_epochs, pretrain_lr=pretrain_lr,
                    adapt_epochs=adapt_epochs, adapt_lr=adapt_lr)
    root = ctx.obj["seed"]
    ds = data_io.load_dataset(data_dir)
    target_dev = _lookup_device(ds.registry, str(vals["target"]))

    split = data_io.split_fewshot(ds, target_dev, int(vals["n_target"]),
                                  derive_seed(root, "fit-split"))
    stats = energy_estimator.dataset_stats(ds)
    target_stats = stats[target_dev.name]
    pre_cfg = replace(experiments.DEFAULT_PRETRAIN_CONFIG,
                      epochs=int(vals["pretrain_epochs"]),
                      learning_rate=float(vals["pretrain_lr"]),
                      rng_seed=derive_seed(root, "fit-pretrain"))
    adapt_cfg = replace(energy_estimator.DEFAULT_ADAPT_CONFIG,
                        epochs=int(vals["adapt_epochs"]),
                        learning_rate=float(vals["adapt_lr"]),
                        rng_seed=derive_seed(root, "fit-adapt"))

    test_y = target_stats.normalize(split.target_test.energies)
    if vals["model"] == "two_stage":
        pre = energy_estimator.pretrain_base(split.source_pool, pre_cfg, int(vals["hidden"]))
        est = energy_estimator.fit_residual(pre, split.target_train, adapt_cfg, stats=target_stats)
        preds = energy_estimator.predict_batch(est, split.target_test.encodings, target_dev)
    else:
        est = energy_estimator.pretrain_and_finetune_joint(
            split.source_pool, split.target_train, pre_cfg, adapt_cfg,
            int(vals["hidden"]), stats=target_stats)
        preds = energy_estimator.predict_joint_batch(est, split.target_test.encodings, target_dev)
    err = preds - test_y
    metrics = {
        "model": vals["model"],
        "target": target_dev.name,
        "n_target": int(vals["n_target"]),
        "test_rmse": float(math.sqrt(float((err * err).mean()))),
        "test_mae": float(abs(err).mean()),
        "test_rows": len(split.target_test),
        "mlp_backend": mlp_core.backend_name(),
    }

    out = _out_dir(ctx)
    bundle_path = out / "estimator.json"
    provenance = {
        "dataset_hash": data_io.dataset_hash(ds),
        "root_seed": root,
        "n_target": int(vals["n_target"]),
        "target": target_dev.name,
    }
    energy_estimator.save_estimator_bundle(est, bundle_path, provenance)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    outputs = [bundle_path, metrics_path]
    _write_manifest(out, "fit", {k: _plain(v) for k, v in vals.items()},
                    {"root": root}, _dataset_input_paths(Path(data_dir)), outputs)
    click.echo(f"test RMSE {metrics['test_rmse']:.4f} ({vals['model']}, n={vals['n_target']})")


def _lookup_device(registry: DeviceRegistry, name: str):
    try:
        return registry.device(name)
    except KeyError as e:
        raise DataError(str(e)) from None


def _plain(v):
    if isinstance(v, Path):
        return str(v)
    return v


# ---------------------------------------------------------------------------


@cli.command()
@click.option("--proxy", "proxy_path", type=click.Path(path_type=Path, exists=True), required=True,
              help="Accuracy-proxy network checkpoint.")
@click.option("--estimator", "estimator_path", type=click.Path(path_type=Path, exists=True),
              required=True, help="Energy estimator bundle.")
@click.option("--budget", type=float, default=math.inf, show_default="inf",
              help="Normalized energy budget (tau).")
@click.option("--device", required=True, help="Deployment device name.")
@click.option("--iterations", type=int, default=4, show_default=True)
@click.option("--init", "init_path", type=click.Path(path_type=Path, exists=True), default=None,
              help="Starting architecture JSON (defaults to the mid-point design).")
@click.option("--enum-limit", type=int, default=1 << 20, show_default=True)
@click.option("--sample-fallback", type=int, default=4096, show_default=True)
@click.pass_context
def search(ctx, proxy_path, estimator_path, budget, device, iterations, init_path,
           enum_limit, sample_fallback):
    """Run budget-constrained iterative search and emit the trace."""
    vals = _resolve(ctx, "search", budget=budget, device=device, iterations=iterations,
                    enum_limit=enum_limit, sample_fallback=sample_fallback)
    root = ctx.obj["seed"]
    proxy = mlp_core.load_network(proxy_path)
    est = energy_estimator.load_estimator_bundle(estimator_path)
    if proxy.input_dim != arch_space.ENCODING_LENGTH:
        raise DataError(
            f"proxy expects {proxy.input_dim}-dim encodings; this search space has "
            f"{arch_space.ENCODING_LENGTH}"
        )
    if est.arch_dim != arch_space.ENCODING_LENGTH:
        raise DataError(
            f"estimator expects {est.arch_dim}-dim architecture encodings; this search "
            f"space has {arch_space.ENCODING_LENGTH}"
        )
    device_id = _lookup_device(est.registry, str(vals["device"]))
    init = arch_space.DEFAULT_INIT_ARCHITECTURE
    if init_path is not None:
        loaded = arch_space.load_architecture(init_path)
        init = loaded.base if isinstance(loaded, arch_space.ScaledDetector) else loaded

    cfg = iterative_search.SearchConfig(
        device=device_id,
        budget_tau=float(vals["budget"]),
        max_iterations=int(vals["iterations"]),
        stage_enumeration_limit=int(vals["enum_limit"]),
        sample_fallback=int(vals["sample_fallback"]),
        rng_seed=derive_seed(root, "search"),
    )
    result, state = iterative_search.run_search(init, proxy, est, cfg)
    report = iterative_search.local_optimality_check(result, proxy, est, cfg)

    out = _out_dir(ctx)
    arch_path = out / "architecture.json"
    arch_space.save_architecture(result.architecture, arch_path)
    trace_path = out / "trace.jsonl"
    iterative_search.write_trace_jsonl(state, trace_path)
    optimality_path = out / "optimality.json"
    optimality_path.write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    result_path = out / "result.json"
    result_path.write_text(
        json.dumps(
            {
                "proxy_map": result.proxy_map,
                "energy": result.energy,
                "feasible": result.feasible,
                "converged_at": result.converged_at,
                "budget_tau": float(vals["budget"]),
                "device": device_id.name,
            },
            sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    outputs = [arch_path, trace_path, optimality_path, result_path]
    inputs = [Path(proxy_path), Path(estimator_path)] + ([Path(init_path)] if init_path else [])
    _write_manifest(out, "search", {k: _plain(v) for k, v in vals.items()},
                    {"root": root, "search": cfg.rng_seed}, inputs, outputs)
    click.echo(
        f"searched architecture: score {result.proxy_map:.4f}, energy {result.energy:.4f}, "
        f"feasible {result.feasible}, converged_at {result.converged_at}"
    )


# ---------------------------------------------------------------------------


@cli.command()
@click.option("--arch", "arch_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--label", type=click.Choice([l.value for l in arch_space.ScaleLabel]), default=None)
@click.option("--all", "scale_all", is_flag=True, default=False,
              help="Emit nano, small, and medium variants.")
@click.pass_context
def scale(ctx, arch_path, label, scale_all):
    """Apply compound scaling to a searched base architecture."""
    if label is None and not scale_all:
        raise click.UsageError("pass --label or --all")
    loaded = arch_space.load_architecture(arch_path)
    base = loaded.base if isinstance(loaded, arch_space.ScaledDetector) else loaded

    labels = list(arch_space.ScaleLabel) if scale_all else [arch_space.ScaleLabel(label)]
    out = _out_dir(ctx)
    outputs = []
    costs = {}
    for lab in labels:
        sd = arch_space.scale_architecture(base, arch_space.DEFAULT_SCALING_FACTORS[lab])
        path = out / f"scaled_{lab.value}.json"
        arch_space.save_architecture(sd, path)
        outputs.append(path)
        costs[lab.value] = arch_space.scaled_cost(sd)
    _write_manifest(out, "scale",
                    {"labels": [l.value for l in labels], "costs": costs},
                    {"root": ctx.obj["seed"]}, [Path(arch_path)], outputs)
    click.echo(", ".join(f"{k}: cost {v:.3g}" for k, v in costs.items()))


# ---------------------------------------------------------------------------


@cli.command()
@click.option("--data", "data_dir", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--target", required=True)
@click.option("--n-min", type=int, default=2, show_default=True)
@click.option("--n-max", type=int, default=20, show_default=True)
@click.option("--n-step", type=int, default=2, show_default=True,
              help="Few-shot sample-count step (the x-axis granularity).")
@click.option("--repetitions", type=int, default=30, show_default=True)
@click.option("--hidden", type=int, default=energy_estimator.DEFAULT_HIDDEN_SIZE, show_default=True)
@click.option("--pretrain-epochs", type=int, default=experiments.DEFAULT_PRETRAIN_CONFIG.epochs,
              show_default=True)
@click.option("--pretrain-lr", type=float, default=experiments.DEFAULT_PRETRAIN_CONFIG.learning_rate,
              show_default=True)
@click.option("--adapt-epochs", type=int, default=energy_estimator.DEFAULT_ADAPT_CONFIG.epochs,
              show_default=True)
@click.option("--adapt-lr", type=float, default=energy_estimator.DEFAULT_ADAPT_CONFIG.learning_rate,
              show_default=True)
@click.option("--sources", default=None,
              help="Comma-separated source device names (default: all non-target devices).")
@click.pass_context
def bench(ctx, data_dir, target, n_min, n_max, n_step, repetitions, hidden,
          pretrain_epochs, pretrain_lr, adapt_epochs, adapt_lr, sources):
    """Few-shot benchmark: two-stage vs joint estimator test RMSE."""
    vals = _resolve(ctx, "bench", target=target, n_min=n_min, n_max=n_max, n_step=n_step,
                    repetitions=repetitions, hidden=hidden, pretrain_epochs=pretrain_epochs,
                    pretrain_lr=pretrain_lr, adapt_epochs=adapt_epochs, adapt_lr=adapt_lr,
                    sources=sources)
    root = ctx.obj["seed"]
    ds = data_io.load_dataset(data_dir)
    target_dev = _lookup_device(ds.registry, str(vals["target"]))
    if vals["sources"]:
        keep = {s.strip() for s in str(vals["sources"]).split(",") if s.strip()} | {target_dev.name}
        unknown = keep - set(ds.registry.names)
        if unknown:
            raise DataError(f"unknown source devices: {sorted(unknown)}")
        rows = [i for i, r in enumerate(ds.records) if r.device.name in keep]
        ds = ds.subset(rows)

    n_values = list(range(int(vals["n_min"]), int(vals["n_max"]) + 1, int(vals["n_step"])))
    cfgs = experiments.FewShotBenchConfig(
        pretrain=replace(experiments.DEFAULT_PRETRAIN_CONFIG,
                         epochs=int(vals["pretrain_epochs"]),
                         learning_rate=float(vals["pretrain_lr"])),
        adapt=replace(energy_estimator.DEFAULT_ADAPT_CONFIG,
                      epochs=int(vals["adapt_epochs"]),
                      learning_rate=float(vals["adapt_lr"])),
        hidden_size=int(vals["hidden"]),
    )
    report = experiments.run_fewshot_benchmark(
        ds, target_dev, n_values, int(vals["repetitions"]), cfgs,
        root_seed=derive_seed(root, "bench"), workers=ctx.obj["workers"],
    )
    out = _out_dir(ctx)
    csv_path = out / "fewshot_report.csv"
    meta_path = out / "fewshot_meta.json"
    experiments.write_fewshot_report(report, csv_path, meta_path)
    outputs = [csv_path, meta_path]
    _write_manifest(out, "bench", {k: _plain(v) for k, v in vals.items()},
                    {"root": root, "bench": derive_seed(root, "bench")},
                    _dataset_input_paths(Path(data_dir)), outputs)
    click.echo(f"wrote {len(report.cells)} benchmark cells to {csv_path}")


# ---------------------------------------------------------------------------


@cli.group()
def report():
    """Analysis reports: pareto dominance, search-space characterization."""


@report.command("pareto")
@click.option("--points", "points_path", type=click.Path(path_type=Path, exists=True),
              required=True, help="CSV with header label,accuracy,energy.")
@click.pass_context
def report_pareto(ctx, points_path):
    """Flag Pareto-dominated (accuracy, energy) points."""
    rows = []
    lines = Path(points_path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "label,accuracy,energy":
        raise DataError(f"{points_path}: expected header 'label,accuracy,energy'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{points_path}: line {lineno}: expected 3 columns")
        try:
            rows.append((parts[0].strip(), float(parts[1]), float(parts[2])))
        except ValueError:
            raise DataError(f"{points_path}: line {lineno}: bad numeric value") from None
    if not rows:
        raise DataError(f"{points_path}: no data rows")
    entries = experiments.pareto_report(rows)
    out = _out_dir(ctx)
    csv_path = out / "pareto.csv"
    experiments.write_pareto_csv(entries, csv_path)
    outputs = [csv_path]
    _write_manifest(out, "report pareto", {"points": str(points_path)},
                    {"root": ctx.obj["seed"]}, [Path(points_path)], outputs)
    kept = sum(1 for e in entries if not e.dominated)
    click.echo(f"{kept}/{len(entries)} points are non-dominated")


@report.command("space")
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--baseline", default="max", show_default=True,
              help="'max', 'min', or an architecture JSON file.")
@click.option("--proxy", "proxy_path", type=click.Path(path_type=Path, exists=True), default=None,
              help="Accuracy-proxy checkpoint (default: seeded synthetic proxy).")
@click.option("--bins", type=int, default=20, show_default=True)
@click.pass_context
def report_space(ctx, samples, baseline, proxy_path, bins):
    """Characterize sampled energies and global vs iterative candidate pools."""
    root = ctx.obj["seed"]
    if baseline == "max":
        baseline_arch = arch_space.MAX_COST_ARCHITECTURE
    elif baseline == "min":
        baseline_arch = arch_space.MIN_COST_ARCHITECTURE
    else:
        loaded = arch_space.load_architecture(Path(baseline))
        baseline_arch = loaded.base if isinstance(loaded, arch_space.ScaledDetector) else loaded
    if proxy_path is not None:
        proxy = mlp_core.load_network(proxy_path)
    else:
        proxy = mlp_core.init_network((arch_space.ENCODING_LENGTH, 1),
                                      derive_seed(root, "space-proxy"))
    rep = experiments.characterize_space(
        int(samples), derive_seed(root, "space"), arch_space.normalized_cost,
        proxy, baseline_arch, bins=int(bins),
    )
    out = _out_dir(ctx)
    path = out / "space_report.json"
    experiments.write_space_report(rep, path)
    outputs = [path]
    inputs = [Path(proxy_path)] if proxy_path else []
    _write_manifest(out, "report space",
                    {"samples": int(samples), "baseline": str(baseline), "bins": int(bins)},
                    {"root": root, "space": derive_seed(root, "space")},
                    inputs, outputs)
    click.echo(
        f"sampled mean energy {rep.energy_mean:.4f} vs baseline {rep.baseline_energy:.4f}"
    )


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except (ValueError, OSError) as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except (InternalCheckError, AssertionError) as e:
        click.echo(f"internal error: {e}", err=True)
        return 3
    except Exception as e:  # pragma: no cover - defensive
        click.echo(f"internal error: {type(e).__name__}: {e}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
