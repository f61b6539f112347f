#!/usr/bin/env python3
"""Pixel-per-metric height estimation across the fixture subjects.

Calibrates from subject 0 (known height), then predicts every other
subject's height from their mask crop alone and compares to ground truth.
"""

from pathlib import Path

from anthroscan.detectors import MaskGeometryDetector
from anthroscan.evaluation import load_manifest
from anthroscan.geometry import crop_mask
from anthroscan.height import calibrate_ppm, estimate_height
from anthroscan.images import load_image

FIXTURES = Path(__file__).parent.parent / "fixtures"


def subject_mask_crop(path):
    image = load_image(path)
    return crop_mask(MaskGeometryDetector().subject_mask(image))


def main():
    records = load_manifest(FIXTURES / "manifest.jsonl")
    reference = records[0]
    crop = subject_mask_crop(FIXTURES / reference.image_path)
    calibration = calibrate_ppm(crop, reference.true_height_cm,
                                device_id=reference.device_tag)
    print(f"calibrated on {reference.record_id}: "
          f"{crop.height} px / {reference.true_height_cm} cm "
          f"= {calibration.ppm:.4f} px/cm\n")

    print(f"{'record':<12} {'true cm':>8} {'pred cm':>8} {'err cm':>7}")
    errors = []
    for record in records:
        crop = subject_mask_crop(FIXTURES / record.image_path)
        predicted = estimate_height(crop, calibration)
        err = predicted - record.true_height_cm
        errors.append(abs(err))
        print(f"{record.record_id:<12} {record.true_height_cm:>8.1f} "
              f"{predicted:>8.1f} {err:>+7.2f}")
    print(f"\nMAE over {len(errors)} subjects: {sum(errors) / len(errors):.2f} cm")


if __name__ == "__main__":
    main()
