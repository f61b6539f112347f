from pathlib import Path

import numpy as np
import pytest

from anthroscan.fixtures import render_person, subject_image
from anthroscan.images import RgbImage

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    assert FIXTURES.exists(), "run scripts/make_fixtures.py first"
    return FIXTURES


@pytest.fixture()
def person_image() -> RgbImage:
    return render_person(height_px=400, torso_half_w=38, shirt=150)


@pytest.fixture()
def small_person_image() -> RgbImage:
    return subject_image(165.0, 22.0, 140)


@pytest.fixture()
def blank_image() -> RgbImage:
    return RgbImage(np.zeros((64, 64, 3), dtype=np.uint8))


@pytest.fixture()
def noise_image() -> RgbImage:
    rng = np.random.default_rng(123)
    return RgbImage(rng.integers(0, 256, (48, 64, 3), dtype=np.uint8).astype(np.uint8))
