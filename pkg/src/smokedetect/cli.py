"""Command-line surface: single-image classify/detect, batch evaluate, manifest split.

Machine-readable JSON goes to stdout (one record per line); human-readable
tables and warnings go to stderr.  Exit codes: 0 success, 2 image decode
error, 3 backend or configuration error, 4 manifest error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import evaluation, imaging, pipeline
from .backends import BackendSuite, load_fixture_backend
from .errors import (
    BackendConfigError,
    DecodeError,
    ParseError,
    SmokedetectError,
    UnknownLabel,
    ValidationError,
)
from .geometry import (
    DEFAULT_FACE_DELTAS,
    DEFAULT_HAND_DELTAS,
    DeltaRule,
    DeltaSpec,
)
from .pipeline import PipelineConfig, Strategy

EXIT_OK = 0
EXIT_DECODE = 2
EXIT_BACKEND = 3
EXIT_MANIFEST = 4


class CliError(SmokedetectError):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def parse_delta_spec(value: object) -> DeltaSpec:
    """Parse a delta flag value: absolute pixels ("10") or a percent ("25%")."""
    if isinstance(value, (int, float)):
        return DeltaSpec(float(value))
    text = str(value).strip()
    try:
        if text.endswith("%"):
            return DeltaSpec(float(text[:-1]) / 100.0, proportional=True)
        return DeltaSpec(float(text))
    except (ValueError, ValidationError) as exc:
        raise CliError(EXIT_BACKEND, f"invalid delta value {value!r}: {exc}") from exc


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise CliError(EXIT_BACKEND, f"cannot read config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise CliError(EXIT_BACKEND, f"malformed config file {path}: {exc}") from exc


def _pick(args_value, config: dict, key: str, default):
    """Flags override the config file; the config file overrides defaults."""
    if args_value is not None:
        return args_value
    if key in config:
        return config[key]
    return default


def _build_pipeline_config(args: argparse.Namespace, config: dict) -> PipelineConfig:
    face_dh = _pick(args.face_dh, config, "face_dh", None)
    face_dv = _pick(args.face_dv, config, "face_dv", None)
    hand_dh = _pick(args.hand_dh, config, "hand_dh", None)
    hand_dv = _pick(args.hand_dv, config, "hand_dv", None)

    face_rule = DeltaRule(
        parse_delta_spec(face_dh) if face_dh is not None else DEFAULT_FACE_DELTAS.horizontal,
        parse_delta_spec(face_dv) if face_dv is not None else DEFAULT_FACE_DELTAS.vertical,
    )
    hand_rule = DeltaRule(
        parse_delta_spec(hand_dh) if hand_dh is not None else DEFAULT_HAND_DELTAS.horizontal,
        parse_delta_spec(hand_dv) if hand_dv is not None else DEFAULT_HAND_DELTAS.vertical,
    )

    strategy_text = _pick(args.strategy, config, "strategy", Strategy.ROI.value)
    try:
        strategy = Strategy(strategy_text)
    except ValueError:
        raise CliError(EXIT_BACKEND, f"unknown strategy {strategy_text!r} (expected roi or raw)") from None

    if args.no_fallback:
        fallback = False
    else:
        fallback = bool(config.get("fallback", True))

    try:
        return PipelineConfig(
            face_deltas=face_rule,
            hand_deltas=hand_rule,
            face_confidence=float(_pick(args.face_conf, config, "face_conf", 0.5)),
            hand_confidence=float(_pick(args.hand_conf, config, "hand_conf", 0.5)),
            detection_confidence=float(_pick(args.det_conf, config, "det_conf", 0.5)),
            strategy=strategy,
            detection_fallback=fallback,
        )
    except ValidationError as exc:
        raise CliError(EXIT_BACKEND, str(exc)) from exc


def _load_backend(args: argparse.Namespace, config: dict) -> BackendSuite:
    selector = _pick(args.backend, config, "backend", None)
    if not selector:
        raise CliError(EXIT_BACKEND, "no backend selected; pass --backend fixture:<path> or model:<dir>")
    kind, _, location = str(selector).partition(":")
    if not location:
        raise CliError(EXIT_BACKEND, f"backend selector {selector!r} needs the form kind:path")
    if kind == "fixture":
        try:
            return load_fixture_backend(location)
        except (ParseError, ValidationError) as exc:
            raise CliError(EXIT_BACKEND, f"cannot load fixture backend: {exc}") from exc
    if kind == "model":
        from .model_adapter import load_model_backend

        try:
            return load_model_backend(location)
        except BackendConfigError as exc:
            raise CliError(EXIT_BACKEND, str(exc)) from exc
    raise CliError(EXIT_BACKEND, f"unknown backend kind {kind!r} (expected fixture or model)")


def _out_dir(args: argparse.Namespace, config: dict) -> Path | None:
    out = _pick(args.out, config, "out", None)
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _decode_image(path: str) -> imaging.ImageRef:
    try:
        return imaging.decode(path)
    except DecodeError as exc:
        raise CliError(EXIT_DECODE, str(exc)) from exc


def _cmd_classify(args: argparse.Namespace, config: dict) -> int:
    suite = _load_backend(args, config)
    cfg = _build_pipeline_config(args, config)
    image = _decode_image(args.image)
    result = pipeline.run_pipeline(image, suite, cfg)
    print(pipeline.result_to_json(result))
    return EXIT_OK


def _cmd_detect(args: argparse.Namespace, config: dict) -> int:
    suite = _load_backend(args, config)
    cfg = _build_pipeline_config(args, config)
    image = _decode_image(args.image)
    result = pipeline.run_pipeline(image, suite, cfg)

    annotated = imaging.render_annotations(
        image, result.proposals, result.detections, int(result.verdict)
    )
    out_dir = _out_dir(args, config) or Path(".")
    out_path = out_dir / f"{image.id}.annotated.png"
    imaging.encode_png(annotated, out_path)
    print(pipeline.result_to_json(result))
    print(f"annotated image written to {out_path}", file=sys.stderr)
    return EXIT_OK


def _load_manifest(path: str) -> list[evaluation.ManifestEntry]:
    try:
        return evaluation.load_manifest(path)
    except (ParseError, UnknownLabel, ValidationError) as exc:
        raise CliError(EXIT_MANIFEST, f"cannot load manifest: {exc}") from exc


def _cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    suite = _load_backend(args, config)
    cfg = _build_pipeline_config(args, config)
    entries = _load_manifest(args.manifest)

    if args.no_split:
        split_enabled = False
    else:
        split_enabled = bool(config.get("split", True))
    seed = int(_pick(args.seed, config, "seed", 0))
    ratio = float(_pick(args.ratio, config, "ratio", 0.8))
    jobs = int(_pick(args.jobs, config, "jobs", 1))
    if jobs < 1:
        raise CliError(EXIT_BACKEND, f"--jobs must be at least 1, got {jobs}")

    if split_enabled and entries:
        try:
            _train, evaluated = evaluation.split_train_test(entries, ratio, seed)
        except ValidationError as exc:
            raise CliError(EXIT_MANIFEST, str(exc)) from exc
    else:
        evaluated = list(entries)

    if not evaluated:
        print("warning: nothing to evaluate (empty manifest or split)", file=sys.stderr)

    outcome = pipeline.run_batch([e.image_path for e in evaluated], suite, cfg, jobs=jobs)
    for error in outcome.errors:
        print(f"warning: skipped {error.image_path}: {error.detail}", file=sys.stderr)

    try:
        report = evaluation.evaluate_results(outcome.results, evaluated)
    except (ValidationError, SmokedetectError) as exc:
        raise CliError(EXIT_MANIFEST, str(exc)) from exc

    record = evaluation.report_to_record(report)
    out_dir = _out_dir(args, config)
    if out_dir is not None:
        (out_dir / "results.jsonl").write_text(
            pipeline.results_to_jsonl(outcome.results), encoding="utf-8"
        )
        (out_dir / "report.json").write_text(json.dumps(record) + "\n", encoding="utf-8")
    print(evaluation.format_report_table(report), file=sys.stderr)
    print(json.dumps(record))
    return EXIT_OK


def _cmd_split(args: argparse.Namespace, config: dict) -> int:
    entries = _load_manifest(args.manifest)
    seed = int(_pick(args.seed, config, "seed", 0))
    ratio = float(_pick(args.ratio, config, "ratio", 0.8))
    try:
        train, test = evaluation.split_train_test(entries, ratio, seed)
    except ValidationError as exc:
        raise CliError(EXIT_MANIFEST, str(exc)) from exc

    out_dir = _out_dir(args, config) or Path(".")
    train_path = out_dir / "train.csv"
    test_path = out_dir / "test.csv"
    evaluation.write_manifest(train, train_path)
    evaluation.write_manifest(test, test_path)
    print(
        json.dumps(
            {
                "train": len(train),
                "test": len(test),
                "train_path": str(train_path),
                "test_path": str(test_path),
            }
        )
    )
    return EXIT_OK


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="backend selector: fixture:<path> or model:<dir>")
    parser.add_argument("--config", help="TOML config file mirroring the flags; flags override it")
    parser.add_argument("--face-dh", help="face horizontal delta: pixels or percent (e.g. 10 or 25%%)")
    parser.add_argument("--face-dv", help="face vertical delta")
    parser.add_argument("--hand-dh", help="hand horizontal delta")
    parser.add_argument("--hand-dv", help="hand vertical delta")
    parser.add_argument("--face-conf", type=float, help="face confidence threshold (default 0.5)")
    parser.add_argument("--hand-conf", type=float, help="hand confidence threshold (default 0.5)")
    parser.add_argument("--det-conf", type=float, help="detection confidence threshold (default 0.5)")
    parser.add_argument("--strategy", choices=[s.value for s in Strategy], help="roi (default) or raw")
    parser.add_argument("--no-fallback", action="store_true", default=None,
                        help="skip per-proposal detection when the full image yields nothing")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smokedetect",
        description="Smoking-behavior pipeline: proposals, classification, gated cigarette detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_classify = sub.add_parser("classify", help="classify one image and print the result record")
    p_classify.add_argument("image")
    _add_common_options(p_classify)
    p_classify.set_defaults(handler=_cmd_classify)

    p_detect = sub.add_parser("detect", help="classify, detect, and write an annotated PNG")
    p_detect.add_argument("image")
    _add_common_options(p_detect)
    p_detect.set_defaults(handler=_cmd_detect)

    p_eval = sub.add_parser("evaluate", help="run a manifest and print the evaluation report")
    p_eval.add_argument("manifest", help="CSV (path,label) or class-folder directory")
    _add_common_options(p_eval)
    p_eval.add_argument("--no-split", action="store_true", default=None,
                        help="evaluate the whole manifest instead of the test portion")
    p_eval.add_argument("--ratio", type=float, help="train fraction for the split (default 0.8)")
    p_eval.add_argument("--seed", type=int, help="split shuffle seed (default 0)")
    p_eval.add_argument("--jobs", type=int, help="batch parallelism for concurrent-safe backends")
    p_eval.set_defaults(handler=_cmd_evaluate)

    p_split = sub.add_parser("split", help="write train/test CSV manifests")
    p_split.add_argument("manifest")
    p_split.add_argument("--ratio", type=float, help="train fraction (default 0.8)")
    p_split.add_argument("--seed", type=int, help="shuffle seed (default 0)")
    p_split.add_argument("--config", help="TOML config file")
    p_split.add_argument("--out", help="output directory (default: current)")
    p_split.set_defaults(handler=_cmd_split)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config_file(getattr(args, "config", None))
        return args.handler(args, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SmokedetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
