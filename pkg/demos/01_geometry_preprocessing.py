#!/usr/bin/env python3
"""Walk through the image-space preprocessing stages on a fixture subject.

Renders a keypoint confidence map, aligns the face crop to the canonical
template, tight-crops the body, and simulates lighting with gamma curves.
Outputs land in demos/out/geometry/.
"""

from pathlib import Path

import numpy as np

from anthroscan.detectors import MaskGeometryDetector
from anthroscan.geometry import align_face, render_confidence_map, tight_crop
from anthroscan.images import apply_gamma, load_image, save_image

FIXTURES = Path(__file__).parent.parent / "fixtures"
OUT = Path(__file__).parent / "out" / "geometry"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    image = load_image(FIXTURES / "person_00.png")
    print(f"input image: {image.width}x{image.height}")

    detector = MaskGeometryDetector()
    mask = detector.subject_mask(image)
    x0, y0, x1, y1 = mask.bounding_box()
    print(f"subject mask: {mask.bits.sum()} px, bbox ({x0},{y0})-({x1},{y1})")

    keypoints = detector.body_keypoints(image, mask)
    nose = keypoints.points[0]
    heat = render_confidence_map(nose, image.width, image.height, sigma=8.0)
    print(f"confidence map for the nose keypoint at ({nose[0]:.1f}, {nose[1]:.1f}): "
          f"peak {heat.values.max():.3f} at pixel {heat.argmax_pixel()}")
    np.savetxt(OUT / "nose_heatmap_row.csv",
               heat.values[heat.argmax_pixel()[1]], fmt="%.6f")

    landmarks = detector.face_landmarks(image, mask)
    face = align_face(image, landmarks, out_size=160)
    save_image(face, OUT / "face_aligned.png")
    print(f"aligned face crop -> {OUT / 'face_aligned.png'}")

    body = tight_crop(image, mask, margin=4)
    save_image(body, OUT / "body_crop.png")
    print(f"tight body crop {body.width}x{body.height} -> {OUT / 'body_crop.png'}")

    for gamma in (0.5, 1.0, 2.0):
        corrupted = apply_gamma(image, gamma)
        save_image(corrupted, OUT / f"gamma_{gamma}.png")
        print(f"gamma {gamma}: mean intensity {image.mean_intensity():.1f} "
              f"-> {corrupted.mean_intensity():.1f}")


if __name__ == "__main__":
    main()
