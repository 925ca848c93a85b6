"""Command-line surface: synth, separate, evaluate, cluster, and
convergence-report subcommands with reproducible, byte-stable outputs.

Exit codes: 1 configuration error, 2 data error, 3 numerical failure.
Progress goes to stderr; stdout carries machine-readable summaries only.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import jsonio
from .advisors import ConstantAdvisor, EchoAdvisor, ExternalAdvisor, HeuristicAdvisor
from .audio import SynthMixSpec, read_wav, synth_mixture, write_wav
from .bss import bss_eval
from .clustering import chem_cluster_pipeline
from .multilayer import ChemInitConfig, escape_experiment
from .nmf import AlphaNmfConfig, NumericalError
from .periodicity import stft_spectrogram
from .separation import (
    AffineParams,
    BlockConfig,
    LingoConfig,
    PeriodConfig,
    SeparationConfig,
    lingo_nmf_separate,
    pl_nmf_separate,
)

__all__ = ["main"]


class ConfigError(ValueError):
    pass


DEFAULT_SEPARATE_CONFIG = {
    "mode": "pl",
    "heart": {"lambda1": 1.0, "lambda2": 1.05, "alpha": 1.0, "layers": 2},
    "lung": {"lambda1": 0.5, "lambda2": 0.55, "alpha": 1.0, "layers": 2},
    "nmf": {"max_iter": 200, "rel_tol": 1e-05, "epsilon_floor": 1e-12, "seed": 0},
    "period": {"min_lag": 2, "peak_threshold_ratio": 0.3},
    "restarts": 4,
    "lingo": {"lambda_f": None, "advisor_period": 10, "initial_f": [100.0, 300.0]},
}

DEFAULT_CLUSTER_CONFIG = {
    "window_len": 256,
    "hop": 128,
    "ranks": [4, 2],
    "k": 2,
    "bounding_factor": 0.5,
    "alpha": 1.0,
    "nmf": {"max_iter": 200, "rel_tol": 1e-05, "epsilon_floor": 1e-12, "seed": 0},
    "kmeans_seed": 0,
}

DEFAULT_REPORT_CONFIG = {
    "ranks": [2, 2, 2, 2, 2],
    "trials": 50,
    "alpha": 1.0,
    "bounding_factor": 0.5,
    "beta": 1.0,
    "partition_Z": 1.0,
    "nmf": {"max_iter": 400, "rel_tol": 1e-09, "epsilon_floor": 1e-12, "seed": 0},
}


def _deep_update(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], val)
        else:
            out[key] = val
    return out


def _apply_set(config: dict, assignments: list[str]) -> dict:
    for raw in assignments:
        if "=" not in raw:
            raise ConfigError(f"--set expects key=value, got '{raw}'")
        key, value = raw.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = parsed
    return config


def _load_config(defaults: dict, args) -> dict:
    config = dict(defaults)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = _deep_update(config, json.load(fh))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    config = _apply_set(config, args.set or [])
    if args.seed is not None:
        if "nmf" in config and isinstance(config["nmf"], dict):
            config["nmf"]["seed"] = args.seed
        config["seed"] = args.seed
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_advisor(spec: str):
    if spec == "heuristic":
        return HeuristicAdvisor()
    if spec == "echo":
        return EchoAdvisor()
    if spec.startswith("constant:"):
        try:
            h, l = (float(v) for v in spec.split(":", 1)[1].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad constant advisor spec '{spec}'") from exc
        return ConstantAdvisor(f_heart=h, f_lung=l)
    if spec.startswith("external:"):
        return ExternalAdvisor(command=spec.split(":", 1)[1].split())
    raise ConfigError(f"unknown advisor '{spec}'")


def _separation_config(config: dict) -> SeparationConfig:
    try:
        heart = config["heart"]
        lung = config["lung"]
        nmf = config["nmf"]
        period = config["period"]
        return SeparationConfig(
            heart=BlockConfig(
                affine=AffineParams(heart["lambda1"], heart["lambda2"]),
                alpha=heart["alpha"],
                layers=heart["layers"],
            ),
            lung=BlockConfig(
                affine=AffineParams(lung["lambda1"], lung["lambda2"]),
                alpha=lung["alpha"],
                layers=lung["layers"],
            ),
            nmf=AlphaNmfConfig(
                alpha=heart["alpha"],
                rank=2,
                max_iter=nmf["max_iter"],
                rel_tol=nmf["rel_tol"],
                epsilon_floor=nmf["epsilon_floor"],
                seed=nmf["seed"],
            ),
            period_cfg=PeriodConfig(
                min_lag=period["min_lag"],
                peak_threshold_ratio=period["peak_threshold_ratio"],
            ),
            restarts=config["restarts"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid separation config: {exc}") from exc


def _load_matrix(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    if path.suffix == ".csv":
        return np.loadtxt(path, delimiter=",", ndmin=2)
    if path.suffix == ".wav":
        seg = read_wav(path)
        window = min(256, max(4, len(seg) // 4))
        return stft_spectrogram(seg, window_len=window, hop=window // 2).magnitudes
    raise ValueError(f"unsupported matrix input {path} (use .npy, .csv, or .wav)")


def cmd_synth(args) -> int:
    out = _out_dir(args)
    config = _load_config({}, args)
    config.pop("seed", None)
    if args.seed is not None:
        config["seed"] = args.seed
    spec = SynthMixSpec.from_dict(config)
    mix = synth_mixture(spec)
    write_wav(out / "mixture.wav", mix.mixture)
    write_wav(out / "heart_ref.wav", mix.heart_ref)
    write_wav(out / "lung_ref.wav", mix.lung_ref)
    payload = {
        "spec": {
            "heart_period_s": spec.heart_period_s,
            "lung_period_s": spec.lung_period_s,
            "heart_band": list(spec.heart_band),
            "lung_band": list(spec.lung_band),
            "snr_db": spec.snr_db,
            "duration_s": spec.duration_s,
            "sample_rate": spec.sample_rate,
            "seed": spec.seed,
        },
        "lung_gain": mix.lung_gain,
        "files": ["mixture.wav", "heart_ref.wav", "lung_ref.wav"],
    }
    jsonio.dump(payload, out / "synth.json")
    print(jsonio.dumps({"written": str(out / "synth.json")}), end="")
    return 0


def cmd_separate(args) -> int:
    config = _load_config(DEFAULT_SEPARATE_CONFIG, args)
    sep_config = _separation_config(config)
    advisor = _build_advisor(args.advisor)
    out = _out_dir(args)

    segment = read_wav(args.input)
    mixture = segment.samples
    if config["mode"] == "lingo":
        lingo_raw = config["lingo"]
        lingo = LingoConfig(
            base=sep_config,
            lambda_f=lingo_raw["lambda_f"],
            advisor_period=lingo_raw["advisor_period"],
            initial_f=tuple(lingo_raw["initial_f"]),
        )
        result = lingo_nmf_separate(mixture, lingo, advisor, segment.sample_rate)
    elif config["mode"] == "pl":
        result = pl_nmf_separate(mixture, sep_config, segment.sample_rate)
    else:
        raise ConfigError(f"mode must be 'pl' or 'lingo', got {config['mode']!r}")

    write_wav(out / "heart.wav", result.heart)
    write_wav(out / "lung.wav", result.lung)
    report = {
        "config": config,
        "input": str(args.input),
        "sample_rate": segment.sample_rate,
        "heart_period_samples": result.heart_period_samples,
        "lung_period_samples": result.lung_period_samples,
        "heart_block": {
            "selected_row": result.heart_block.selected_row,
            "row_periods": result.heart_block.row_periods,
            "restart_scores": result.heart_block.restart_scores,
            "best_restart": result.heart_block.best_restart,
            "tie_warning": result.heart_block.tie_warning,
            "per_layer_traces": result.heart_block.per_layer_traces,
        },
        "lung_block": {
            "selected_row": result.lung_block.selected_row,
            "row_periods": result.lung_block.row_periods,
            "restart_scores": result.lung_block.restart_scores,
            "best_restart": result.lung_block.best_restart,
            "tie_warning": result.lung_block.tie_warning,
            "per_layer_traces": result.lung_block.per_layer_traces,
        },
    }
    if hasattr(result, "advisor_log"):
        report["advisor_log"] = result.advisor_log
        report["penalized_cost_trace"] = result.penalized_cost_trace
    jsonio.dump(report, out / "report.json")
    print(jsonio.dumps({"written": str(out / "report.json")}), end="")
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    estimates = [read_wav(p) for p in args.estimates]
    references = [read_wav(p) for p in args.references]
    if len(estimates) != len(references):
        raise ConfigError("need as many estimates as references")
    n = min(min(len(e) for e in estimates), min(len(r) for r in references))
    ref_vecs = [r.samples[:n] for r in references]
    names = ["heart", "lung"] if len(estimates) == 2 else [
        f"source_{i}" for i in range(len(estimates))
    ]
    rows = []
    for i, est in enumerate(estimates):
        scores = bss_eval(est.samples[:n], ref_vecs, target_index=i)
        rows.append(
            {
                "file": str(args.estimates[i]),
                "source": names[i],
                **scores.to_dict(),
            }
        )
    jsonio.dump({"scores": rows}, out / "scores.json")
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["file", "source", "sdr_db", "sir_db", "sar_db"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in writer.fieldnames})
    print(jsonio.dumps({"written": str(out / "scores.json")}), end="")
    return 0


def cmd_cluster(args) -> int:
    config = _load_config(DEFAULT_CLUSTER_CONFIG, args)
    out = _out_dir(args)
    segments = [read_wav(p) for p in args.inputs]
    n = min(len(s) for s in segments)
    specs = [
        stft_spectrogram(
            type(s)(samples=s.samples[:n], sample_rate=s.sample_rate),
            window_len=config["window_len"],
            hop=config["hop"],
        )
        for s in segments
    ]
    truth = None
    if args.truth:
        truth = [
            int(line.strip())
            for line in Path(args.truth).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if len(truth) != len(specs):
            raise ValueError(
                f"{len(truth)} truth labels for {len(specs)} inputs"
            )
    nmf_raw = config["nmf"]
    nmf_config = AlphaNmfConfig(
        alpha=config["alpha"],
        rank=int(config["ranks"][0]),
        max_iter=nmf_raw["max_iter"],
        rel_tol=nmf_raw["rel_tol"],
        epsilon_floor=nmf_raw["epsilon_floor"],
        seed=nmf_raw["seed"],
    )
    chem = ChemInitConfig(bounding_factor=config["bounding_factor"])
    result = chem_cluster_pipeline(
        specs,
        [int(r) for r in config["ranks"]],
        nmf_config,
        chem,
        k=int(config["k"]),
        true_labels=truth,
        kmeans_seed=int(config["kmeans_seed"]),
    )
    jsonio.dump(
        {
            "config": config,
            "labels": result.assignment.labels.tolist(),
            "inertia": result.assignment.inertia,
            "scores": result.scores.to_dict(),
            "layer_costs": result.stack.layer_costs,
        },
        out / "scores.json",
    )
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "file", "label"])
        for i, (path, label) in enumerate(zip(args.inputs, result.assignment.labels)):
            writer.writerow([i, str(path), int(label)])
    print(jsonio.dumps({"written": str(out / "scores.json")}), end="")
    return 0


def cmd_convergence_report(args) -> int:
    config = _load_config(DEFAULT_REPORT_CONFIG, args)
    out = _out_dir(args)
    Y = _load_matrix(Path(args.input))
    nmf_raw = config["nmf"]
    nmf_config = AlphaNmfConfig(
        alpha=config["alpha"],
        rank=int(config["ranks"][0]),
        max_iter=nmf_raw["max_iter"],
        rel_tol=nmf_raw["rel_tol"],
        epsilon_floor=nmf_raw["epsilon_floor"],
        seed=nmf_raw["seed"],
    )
    chem = ChemInitConfig(
        bounding_factor=config["bounding_factor"],
        beta=config["beta"],
        partition_Z=config["partition_Z"],
    )
    report = escape_experiment(
        Y,
        [int(r) for r in config["ranks"]],
        nmf_config,
        chem,
        trials=int(config["trials"]),
    )
    payload = {"config": config, "input": str(args.input), **report.to_dict()}
    jsonio.dump(payload, out / "escape_report.json")
    print(jsonio.dumps({"written": str(out / "escape_report.json")}), end="")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a (dotted) config key; repeatable; wins over --config",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardionmf",
        description="Heart/lung sound separation and spectrogram clustering "
        "with multi-layer alpha-divergence NMF.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic mixture triple")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("separate", help="separate a mixture WAV into heart/lung")
    p.add_argument("input", help="mixture WAV file")
    p.add_argument(
        "--advisor",
        default="heuristic",
        help="heuristic | echo | constant:FH,FL | external:CMD",
    )
    _add_common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("evaluate", help="score estimates against references")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--references", nargs="+", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster", help="cluster WAV spectrograms")
    p.add_argument("inputs", nargs="+", help="WAV files to cluster")
    p.add_argument("--truth", help="file with one integer label per input line")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser(
        "convergence-report", help="escape/survival restart experiment"
    )
    p.add_argument("input", help="matrix input (.npy, .csv, or .wav)")
    _add_common(p)
    p.set_defaults(func=cmd_convergence_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
