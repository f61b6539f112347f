"""Operator command-line entry points for every pipeline stage.

Exit codes: 0 success, 2 validation/usage, 3 data, 4 training,
5 provider. Every run writes a run-manifest.json (inputs, digests, seed,
version) into --out-dir so results can be reproduced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, fusion
from .config import PipelineConfig
from .detectors import MaskGeometryDetector, SidecarAnnotationProvider
from .errors import (AnthroscanError, ConfigurationError, ContractError,
                     DataError, FormatError, IngestionError, NoSubjectError,
                     NumericError, ParameterError, ProviderError, StorageError,
                     TopologyError, TrainingError)
from .geometry import align_face, crop_mask, tight_crop
from .images import load_image, save_image
from .mesh import (EllipsoidReconstructor, normalize_point_cloud,
                   sample_point_cloud, save_mesh, save_point_cloud)
from .pipeline import Pipeline, canonical_json, canonical_json_bytes

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_PROVIDER = 5

_EXIT_BY_TYPE = (
    (TrainingError, EXIT_TRAINING),
    (NumericError, EXIT_TRAINING),
    (ProviderError, EXIT_PROVIDER),
    (ContractError, EXIT_PROVIDER),
    (TopologyError, EXIT_PROVIDER),
    (IngestionError, EXIT_DATA),
    (DataError, EXIT_DATA),
    (FormatError, EXIT_DATA),
    (StorageError, EXIT_DATA),
    (NoSubjectError, EXIT_DATA),
    (ConfigurationError, EXIT_VALIDATION),
    (ParameterError, EXIT_VALIDATION),
)


def _exit_code(exc: AnthroscanError) -> int:
    for etype, code in _EXIT_BY_TYPE:
        if isinstance(exc, etype):
            return code
    return 1


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_run_manifest(out_dir: Path, command: str, argv, seed, inputs, outputs):
    manifest = {
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "package_version": __version__,
        "inputs": {str(k): _sha256_file(Path(v)) for k, v in inputs.items()
                   if v and Path(v).exists()},
        "outputs": [str(o) for o in outputs],
    }
    (out_dir / "run-manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig(base_dir=Path.cwd())
    config.apply_overrides(getattr(args, "set", None))
    return config


def _training_config(args) -> fusion.TrainingConfig:
    return fusion.TrainingConfig(
        learning_rate=args.learning_rate, epochs=args.epochs,
        batch_size=args.batch_size, ridge_lambda=args.ridge_lambda,
        seed=args.seed, early_stop_patience=args.patience)


def _gamma_list(text: str):
    try:
        return [float(g) for g in text.split(",") if g.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad gamma list {text!r}: {exc}") from exc


# --- subcommands -----------------------------------------------------------

def cmd_preprocess(args, argv) -> int:
    out = _out_dir(args)
    image = load_image(args.image)
    if args.annotations:
        provider = SidecarAnnotationProvider(args.annotations)
        detector = MaskGeometryDetector()
        mask = detector.subject_mask(image)
        landmarks = provider.face_landmarks(image)
    else:
        detector = MaskGeometryDetector()
        mask = detector.subject_mask(image)
        landmarks = detector.face_landmarks(image, mask)
    face = align_face(image, landmarks, out_size=args.align_size)
    body = tight_crop(image, mask, margin=args.margin)
    save_image(face, out / "face.png")
    save_image(body, out / "body.png")
    stats = {
        "image": str(args.image),
        "mask_pixels": int(mask.bits.sum()),
        "mask_bbox": list(mask.bounding_box()),
        "face_size": [face.width, face.height],
        "body_size": [body.width, body.height],
    }
    (out / "preprocess.json").write_text(canonical_json(stats) + "\n")
    _write_run_manifest(out, "preprocess", argv, args.seed,
                        {"image": args.image},
                        ["face.png", "body.png", "preprocess.json"])
    print(canonical_json(stats))
    return EXIT_OK


def cmd_height(args, argv) -> int:
    from .height import CalibrationRegistry, calibrate_ppm, estimate_height
    out = _out_dir(args)
    image = load_image(args.image)
    detector = MaskGeometryDetector()
    mask_crop = crop_mask(detector.subject_mask(image))
    registry_path = Path(args.calibration)
    registry = (CalibrationRegistry.load(registry_path) if registry_path.exists()
                else CalibrationRegistry())
    outputs = []
    if args.calibrate_height_cm is not None:
        calibration = calibrate_ppm(mask_crop, args.calibrate_height_cm,
                                    device_id=args.device)
        registry.register(calibration)
        registry.save(registry_path)
        result = {"calibrated": True, "device_id": args.device,
                  "ppm": calibration.ppm}
        outputs.append(str(registry_path))
    else:
        calibration = registry.get_or_default(args.device)
        result = {"device_id": calibration.device_id,
                  "height_cm": round(estimate_height(mask_crop, calibration), 6),
                  "ppm": calibration.ppm}
    (out / "height.json").write_text(canonical_json(result) + "\n")
    _write_run_manifest(out, "height", argv, args.seed, {"image": args.image},
                        outputs + ["height.json"])
    print(canonical_json(result))
    return EXIT_OK


def cmd_reconstruct(args, argv) -> int:
    out = _out_dir(args)
    image = load_image(args.image)
    mesh = EllipsoidReconstructor().reconstruct(image)
    cloud = normalize_point_cloud(sample_point_cloud(mesh, args.points, args.seed))
    save_mesh(mesh, out / "mesh.off")
    save_point_cloud(cloud, out / "cloud.xyz")
    _write_run_manifest(out, "reconstruct", argv, args.seed,
                        {"image": args.image}, ["mesh.off", "cloud.xyz"])
    print(canonical_json({"faces": mesh.n_faces, "points": len(cloud)}))
    return EXIT_OK


def cmd_embed(args, argv) -> int:
    out = _out_dir(args)
    config = _load_config(args)
    image = load_image(args.image)
    from .embeddings import ExtractorDescriptor, ImageStatsExtractor
    if args.modality == "cloud":
        mesh = EllipsoidReconstructor().reconstruct(image)
        payload = normalize_point_cloud(sample_point_cloud(mesh, config.cloud_points,
                                                           config.cloud_seed))
    elif args.modality == "face":
        detector = MaskGeometryDetector()
        mask = detector.subject_mask(image)
        payload = align_face(image, detector.face_landmarks(image, mask),
                             out_size=config.align_size)
    else:
        detector = MaskGeometryDetector()
        payload = tight_crop(image, detector.subject_mask(image),
                             margin=config.body_margin)
    extractor = ImageStatsExtractor(
        ExtractorDescriptor(args.modality, "synthetic-image-stats"),
        config.provider_seed)
    vector = extractor.extract(payload)
    np.savetxt(out / "embedding.txt", vector.values, fmt="%.9g")
    _write_run_manifest(out, "embed", argv, args.seed, {"image": args.image},
                        ["embedding.txt"])
    print(canonical_json({"modality": args.modality, "dim": len(vector.values),
                          "digest": extractor.descriptor.digest}))
    return EXIT_OK


def cmd_train(args, argv) -> int:
    out = _out_dir(args)
    records = evaluation.load_manifest(args.manifest)
    train = evaluation.by_split(records, "train")
    val = evaluation.by_split(records, "val")
    if len(train) < 2:
        raise DataError("manifest needs at least 2 train records")
    extractors = evaluation.make_extractors(seed=args.seed)
    config = _training_config(args)
    train_set = evaluation.build_dataset(train, extractors)
    val_set = evaluation.build_dataset(val, extractors) if val else None
    params, log = fusion.fit(train_set, config, val_set)
    params_path = out / "params.bin"
    fusion.save_params_file(params, params_path)
    (out / "training-log.jsonl").write_text(log.to_jsonl())
    _write_run_manifest(out, "train", argv, args.seed,
                        {"manifest": args.manifest},
                        ["params.bin", "training-log.jsonl"])
    w = fusion.fusion_weights(params)
    print(canonical_json({"params": str(params_path),
                          "digest": fusion.params_digest(params),
                          "w_F": round(float(w[0]), 6),
                          "w_B": round(float(w[1]), 6),
                          "w_R": round(float(w[2]), 6)}))
    return EXIT_OK


def cmd_estimate(args, argv) -> int:
    out = _out_dir(args)
    config = _load_config(args)
    pipeline = Pipeline.from_config(config)
    image_bytes = Path(args.image).read_bytes()
    response = pipeline.estimate(image_bytes, args.age, args.gender, args.device)
    payload = canonical_json_bytes(response)
    (out / "response.json").write_bytes(payload)
    _write_run_manifest(out, "estimate", argv, args.seed,
                        {"image": args.image,
                         "params": config.resolve(config.params_path)},
                        ["response.json"])
    sys.stdout.write(payload.decode("utf-8") + "\n")
    return EXIT_OK


def cmd_evaluate(args, argv) -> int:
    out = _out_dir(args)
    records = evaluation.load_manifest(args.manifest)
    subset = evaluation.by_split(records, args.split)
    if not subset:
        raise DataError(f"no records in split {args.split!r}")
    params = fusion.load_params_file(args.params)
    extractors = evaluation.make_extractors(seed=args.seed)
    reports = []
    if args.group_by:
        grouped = evaluation.evaluate_by_group(subset, params, extractors,
                                               key=args.group_by)
        reports = list(grouped.values())
    else:
        reports = [evaluation.evaluate_records(subset, params, extractors,
                                               labels={"split": args.split})]
    if args.calibration:
        from .height import CalibrationRegistry
        calibration = CalibrationRegistry.load(args.calibration).get_or_default(None)
        reports = [evaluation.with_height_metrics(r, subset, calibration,
                                                  args.image_root)
                   for r in reports]
    (out / "evaluation.csv").write_text(evaluation.reports_to_csv(reports))
    (out / "evaluation.jsonl").write_text(evaluation.reports_to_jsonl(reports))
    _write_run_manifest(out, "evaluate", argv, args.seed,
                        {"manifest": args.manifest, "params": args.params},
                        ["evaluation.csv", "evaluation.jsonl"])
    print(evaluation.reports_to_csv(reports), end="")
    return EXIT_OK


def cmd_ablate(args, argv) -> int:
    out = _out_dir(args)
    records = evaluation.load_manifest(args.manifest)
    config = _training_config(args)
    grid = evaluation.architecture_grid() if args.grid else None
    masks = args.masks.split(",") if args.masks else None
    reports = evaluation.run_ablation(records, config, grid=grid,
                                      feature_masks=masks, seed=args.seed)
    (out / "ablation.csv").write_text(evaluation.reports_to_csv(reports))
    (out / "ablation.jsonl").write_text(evaluation.reports_to_jsonl(reports))
    _write_run_manifest(out, "ablate", argv, args.seed,
                        {"manifest": args.manifest},
                        ["ablation.csv", "ablation.jsonl"])
    print(evaluation.reports_to_csv(reports), end="")
    return EXIT_OK


def cmd_lighting_sweep(args, argv) -> int:
    out = _out_dir(args)
    records = evaluation.load_manifest(args.manifest)
    subset = evaluation.by_split(records, args.split)
    if not subset:
        raise DataError(f"no records in split {args.split!r}")
    params = fusion.load_params_file(args.params)
    extractors = evaluation.make_extractors(seed=args.seed,
                                            sensitivity=args.sensitivity)
    gammas = _gamma_list(args.gammas)
    results = evaluation.lighting_sweep(subset, gammas, params, extractors,
                                        image_root=args.image_root)
    lines = ["gamma,mae,rmse,r2"]
    lines += [f"{g!r},{rep.mae!r},{rep.rmse!r},{rep.r2!r}" for g, rep in results]
    text = "\n".join(lines) + "\n"
    (out / "lighting.csv").write_text(text)
    _write_run_manifest(out, "lighting-sweep", argv, args.seed,
                        {"manifest": args.manifest, "params": args.params},
                        ["lighting.csv"])
    print(text, end="")
    return EXIT_OK


def cmd_plot_data(args, argv) -> int:
    out = _out_dir(args)
    records = evaluation.load_manifest(args.manifest)
    subset = evaluation.by_split(records, args.split)
    if not subset:
        raise DataError(f"no records in split {args.split!r}")
    params = fusion.load_params_file(args.params)
    outputs = []
    if args.kind == "lighting":
        extractors = evaluation.make_extractors(seed=args.seed,
                                                sensitivity=args.sensitivity)
        results = evaluation.lighting_sweep(subset, _gamma_list(args.gammas),
                                            params, extractors,
                                            image_root=args.image_root)
        lines = ["gamma,mae"] + [f"{g!r},{rep.mae!r}" for g, rep in results]
        (out / "lighting-mae.csv").write_text("\n".join(lines) + "\n")
        outputs.append("lighting-mae.csv")
    else:  # correlation
        extractors = evaluation.make_extractors(seed=args.seed)
        for mask_name in (args.masks.split(",") if args.masks else ["ALL"]):
            if mask_name not in evaluation.FEATURE_MASKS:
                raise ParameterError(f"unknown feature mask {mask_name!r}")
            mask = evaluation.FEATURE_MASKS[mask_name]
            preds = evaluation.predict_weights(subset, params, extractors, mask)
            lines = ["record_id,true_weight_kg,pred_weight_kg"]
            lines += [f"{r.record_id},{r.true_weight_kg!r},{p!r}"
                      for r, p in zip(subset, preds)]
            name = f"correlation-{mask_name.replace('+', '_')}.csv"
            (out / name).write_text("\n".join(lines) + "\n")
            outputs.append(name)
    _write_run_manifest(out, "plot-data", argv, args.seed,
                        {"manifest": args.manifest, "params": args.params},
                        outputs)
    print(canonical_json({"outputs": outputs}))
    return EXIT_OK


def cmd_serve(args, argv) -> int:
    import uvicorn

    from .service import create_app
    config = _load_config(args)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anthroscan",
        description="Single-image anthropometric estimation pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, config_flag=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")
        if config_flag:
            p.add_argument("--config", default=None)
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config value")

    p = sub.add_parser("preprocess", help="mask, align and crop one image")
    p.add_argument("--image", required=True)
    p.add_argument("--annotations", default=None,
                   help="image path whose sidecar annotations to use")
    p.add_argument("--align-size", type=int, default=160)
    p.add_argument("--margin", type=int, default=4)
    common(p, config_flag=False)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("height", help="estimate height or calibrate ppm")
    p.add_argument("--image", required=True)
    p.add_argument("--calibration", default="calibration.json")
    p.add_argument("--device", default="default")
    p.add_argument("--calibrate-height-cm", type=float, default=None,
                   help="register a calibration from this known height")
    common(p, config_flag=False)
    p.set_defaults(func=cmd_height)

    p = sub.add_parser("reconstruct", help="mesh + point cloud from one image")
    p.add_argument("--image", required=True)
    p.add_argument("--points", type=int, default=2048)
    common(p, config_flag=False)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("embed", help="extract one modality embedding")
    p.add_argument("--image", required=True)
    p.add_argument("--modality", choices=("face", "body", "cloud"), required=True)
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train fusion params from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--ridge-lambda", type=float, default=1e-3)
    p.add_argument("--patience", type=int, default=20)
    common(p, config_flag=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="full pipeline on one image")
    p.add_argument("--image", required=True)
    p.add_argument("--age", type=float, required=True)
    p.add_argument("--gender", required=True)
    p.add_argument("--device", default=None)
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="metrics for a manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--group-by", default=None,
                   help="report per record tag, e.g. device_tag")
    p.add_argument("--calibration", default=None,
                   help="ppm registry; adds height metrics for records with images")
    p.add_argument("--image-root", default="")
    common(p, config_flag=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="architecture grid / feature-mask sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", action="store_true",
                   help="run the full architecture grid")
    p.add_argument("--masks", default=None,
                   help="comma-separated feature masks, e.g. FF,BF,DF,ALL")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--ridge-lambda", type=float, default=1e-3)
    p.add_argument("--patience", type=int, default=20)
    common(p, config_flag=False)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("lighting-sweep", help="MAE under gamma-corrected lighting")
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--gammas", default="0.25,0.5,1.0,1.5,2.0")
    p.add_argument("--sensitivity", type=float, default=4.0)
    p.add_argument("--image-root", default="")
    common(p, config_flag=False)
    p.set_defaults(func=cmd_lighting_sweep)

    p = sub.add_parser("plot-data", help="emit figure data series as CSV")
    p.add_argument("--kind", choices=("lighting", "correlation"), required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--gammas", default="0.25,0.5,1.0,1.5,2.0")
    p.add_argument("--sensitivity", type=float, default=4.0)
    p.add_argument("--image-root", default="")
    p.add_argument("--masks", default="FF,BF,DF,ALL")
    common(p, config_flag=False)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("ANTHROSCAN_PORT", "8080")))
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except AnthroscanError as exc:
        print(f"error [{exc.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except FileNotFoundError as exc:
        print(f"error [io] FileNotFoundError: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
