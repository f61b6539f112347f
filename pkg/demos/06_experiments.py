#!/usr/bin/env python3
"""The experiment battery on a synthetic desk-scale manifest.

Runs the architecture grid, the pairwise feature-mask sweep, grouped
device evaluation and the gamma lighting sweep, printing one table per
experiment. CSV copies land in demos/out/experiments/.
"""

import tempfile
from pathlib import Path

from anthroscan import fusion
from anthroscan.evaluation import (architecture_grid, build_dataset, by_split,
                                   evaluate_by_group, feature_importance,
                                   lighting_sweep, make_extractors,
                                   make_synthetic_manifest, reports_to_csv,
                                   run_ablation, SubjectRecord)
from anthroscan.fixtures import subject_image
from anthroscan.images import save_image

OUT = Path(__file__).parent / "out" / "experiments"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    records = make_synthetic_manifest(60, seed=13)
    config = fusion.TrainingConfig(epochs=25, batch_size=16, seed=0)

    print("=== architecture grid (2 face x 2 body x 3 cloud extractors) ===")
    grid_reports = run_ablation(records, config, grid=architecture_grid())
    (OUT / "architecture_grid.csv").write_text(reports_to_csv(grid_reports))
    print(f"{'face':<14}{'body':<15}{'cloud':<14}{'MAE':>7} {'RMSE':>7} {'R2':>6}")
    for r in sorted(grid_reports, key=lambda r: r.mae):
        lab = r.labels
        print(f"{lab['face_fe']:<14}{lab['body_fe']:<15}{lab['cloud_fe']:<14}"
              f"{r.mae:>7.3f} {r.rmse:>7.3f} {r.r2:>6.3f}")

    print("\n=== pairwise feature combinations ===")
    mask_reports = run_ablation(records, config,
                                feature_masks=["FF", "BF", "DF", "FF+BF",
                                               "FF+DF", "BF+DF", "ALL"])
    (OUT / "feature_masks.csv").write_text(reports_to_csv(mask_reports))
    for r in sorted(mask_reports, key=lambda r: r.mae):
        print(f"{r.labels['feature_mask']:<8} MAE {r.mae:7.3f}  RMSE {r.rmse:7.3f}"
              f"  R2 {r.r2:6.3f}")

    print("\n=== learned feature importance on the default architecture ===")
    extractors = make_extractors(seed=0)
    train = by_split(records, "train")
    params, _ = fusion.fit(build_dataset(train, extractors), config)
    w_f, w_b, w_r = feature_importance(params)
    print(f"w_face {w_f:.4f} | w_body {w_b:.4f} | w_cloud {w_r:.4f} "
          f"(sum {w_f + w_b + w_r:.6f})")

    print("\n=== per-device evaluation (grouped test split) ===")
    grouped = evaluate_by_group(by_split(records, "test"), params, extractors)
    for tag, report in grouped.items():
        print(f"{tag:<10} n={report.n:<3} MAE {report.mae:6.3f}")

    print("\n=== lighting sweep (gamma-corrected images) ===")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        sweep_records = []
        for i, r in enumerate(train):
            name = f"img_{i}.png"
            save_image(subject_image(r.true_height_cm, 22.0, 100 + 3 * i), tmp / name)
            sweep_records.append(SubjectRecord(
                r.record_id, r.gender, r.age_years, r.true_weight_kg,
                r.true_height_cm, image_path=name, split=r.split,
                device_tag=r.device_tag))
        long_config = fusion.TrainingConfig(epochs=150, batch_size=16, seed=0)
        sweep_params, _ = fusion.fit(build_dataset(sweep_records, extractors),
                                     long_config)
        results = lighting_sweep(sweep_records, [0.25, 0.5, 1.0, 1.5, 2.0],
                                 sweep_params, extractors, image_root=tmp)
        lines = ["gamma,mae"]
        for gamma, report in results:
            print(f"gamma {gamma:<5} MAE {report.mae:.4f}")
            lines.append(f"{gamma},{report.mae!r}")
        (OUT / "lighting_sweep.csv").write_text("\n".join(lines) + "\n")
    print("\nCSV tables written to", OUT)


if __name__ == "__main__":
    main()
