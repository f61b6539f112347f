import concurrent.futures
import json
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from anthroscan.config import PipelineConfig
from anthroscan.errors import ConfigurationError, StorageError
from anthroscan.pipeline import Pipeline, canonical_json_bytes
from anthroscan.service import ADMIN_TOKEN_ENV, create_app
from anthroscan.store import RecordStore


def _config(fixtures_dir, tmp_path):
    return PipelineConfig(
        params_path=str(fixtures_dir / "params.bin"),
        calibration_path=str(fixtures_dir / "calibration.json"),
        store_dir=str(tmp_path / "store"),
        base_dir=tmp_path,
    )


@pytest.fixture()
def pipeline(fixtures_dir, tmp_path):
    return Pipeline.from_config(_config(fixtures_dir, tmp_path))


@pytest.fixture()
def client(fixtures_dir, tmp_path):
    app = create_app(_config(fixtures_dir, tmp_path))
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture()
def fixture_png(fixtures_dir):
    return (fixtures_dir / "person_00.png").read_bytes()


class TestPipeline:
    def test_matches_golden_response(self, pipeline, fixtures_dir, fixture_png):
        response = pipeline.estimate(fixture_png, 25.0, "male")
        golden = (fixtures_dir / "golden_response.json").read_bytes()
        assert canonical_json_bytes(response) == golden

    def test_deterministic_across_calls(self, pipeline, fixture_png):
        a = pipeline.estimate(fixture_png, 31.0, "female", "phone-a")
        b = pipeline.estimate(fixture_png, 31.0, "female", "phone-a")
        assert canonical_json_bytes(a) == canonical_json_bytes(b)

    def test_health_fields_satisfy_invariants(self, pipeline, fixture_png):
        r = pipeline.estimate(fixture_png, 40.0, "female")
        h = r["health"]
        assert h["bmi"] > 0 and h["bmr"] > 0
        assert h["active_bmr"] >= h["bmr"]
        assert h["classification"] in ("healthy", "malnourished")
        assert r["height_cm"] > 0 and r["weight_kg"] > 0

    def test_record_id_depends_on_inputs(self, pipeline, fixture_png):
        a = pipeline.estimate(fixture_png, 25.0, "male")
        b = pipeline.estimate(fixture_png, 26.0, "male")
        assert a["record_id"] != b["record_id"]

    def test_undecodable_image(self, pipeline):
        from anthroscan.errors import ParameterError
        with pytest.raises(ParameterError) as err:
            pipeline.estimate(b"not a png", 25.0, "male")
        assert err.value.stage == "decode"

    def test_blank_image_is_no_subject(self, pipeline):
        from anthroscan.errors import NoSubjectError
        from anthroscan.images import RgbImage, encode_png
        blank = encode_png(RgbImage(np.zeros((32, 32, 3), dtype=np.uint8)))
        with pytest.raises(NoSubjectError) as err:
            pipeline.estimate(blank, 25.0, "male")
        assert err.value.stage == "segmentation"

    def test_bad_age_and_gender(self, pipeline, fixture_png):
        from anthroscan.errors import ParameterError
        with pytest.raises(ParameterError):
            pipeline.estimate(fixture_png, -1.0, "male")
        with pytest.raises(ParameterError):
            pipeline.estimate(fixture_png, 25.0, "robot")

    def test_missing_params_path(self, tmp_path):
        with pytest.raises(ConfigurationError):
            Pipeline.from_config(PipelineConfig(base_dir=tmp_path))

    def test_unknown_provider_name(self, fixtures_dir, tmp_path):
        cfg = _config(fixtures_dir, tmp_path)
        cfg.providers["face"] = "resnet-mainframe"
        with pytest.raises(ConfigurationError, match="resnet-mainframe"):
            Pipeline.from_config(cfg)


class TestEstimateEndpoint:
    def test_golden_equality(self, client, fixtures_dir, fixture_png):
        resp = client.post("/api/v1/estimate",
                           files={"image": ("p.png", fixture_png, "image/png")},
                           data={"age_years": "25", "gender": "male"})
        assert resp.status_code == 200
        assert resp.content == (fixtures_dir / "golden_response.json").read_bytes()

    def test_missing_gender_lists_field(self, client, fixture_png):
        resp = client.post("/api/v1/estimate",
                           files={"image": ("p.png", fixture_png, "image/png")},
                           data={"age_years": "25"})
        assert resp.status_code == 422
        body = resp.json()
        assert body["stage"] == "validation"
        assert "gender" in body["message"]
        assert body["details"]["missing"] == ["gender"]

    def test_undecodable_image_is_400(self, client):
        resp = client.post("/api/v1/estimate",
                           files={"image": ("p.png", b"junk", "image/png")},
                           data={"age_years": "25", "gender": "male"})
        assert resp.status_code == 400
        assert resp.json()["stage"] == "decode"

    def test_blank_image_is_422_with_stage(self, client):
        from anthroscan.images import RgbImage, encode_png
        blank = encode_png(RgbImage(np.zeros((16, 16, 3), dtype=np.uint8)))
        resp = client.post("/api/v1/estimate",
                           files={"image": ("p.png", blank, "image/png")},
                           data={"age_years": "25", "gender": "male"})
        assert resp.status_code == 422
        assert resp.json()["stage"] == "segmentation"

    def test_health_endpoint(self, client):
        resp = client.get("/api/v1/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestRecordAndPlanEndpoints:
    def _estimate(self, client, fixture_png, age="25"):
        resp = client.post("/api/v1/estimate",
                           files={"image": ("p.png", fixture_png, "image/png")},
                           data={"age_years": age, "gender": "male"})
        assert resp.status_code == 200
        return resp.json()

    def test_store_then_fetch_round_trip(self, client, fixture_png):
        est = self._estimate(client, fixture_png)
        resp = client.get(f"/api/v1/records/{est['record_id']}")
        assert resp.status_code == 200
        stored = resp.json()
        assert stored["response"] == est
        assert stored["plans"] == []
        again = client.get(f"/api/v1/records/{est['record_id']}")
        assert again.content == resp.content

    def test_unknown_record_is_404(self, client):
        resp = client.get("/api/v1/records/nope")
        assert resp.status_code == 404

    def test_plan_flow(self, client, fixture_png):
        est = self._estimate(client, fixture_png)
        resp = client.post(f"/api/v1/records/{est['record_id']}/plan",
                           json={"diet_type": "balanced", "weeks": 10,
                                 "activity_level": "moderate"})
        assert resp.status_code == 200
        plan = resp.json()
        assert plan["weeks"] == 10
        assert len(plan["weekly_weights_kg"]) == 11
        assert plan["weekly_weights_kg"][0] == pytest.approx(est["weight_kg"], abs=1e-6)
        fetched = client.get(f"/api/v1/records/{est['record_id']}").json()
        assert len(fetched["plans"]) == 1

    def test_plan_unknown_record_404(self, client):
        resp = client.post("/api/v1/records/missing/plan",
                           json={"diet_type": "balanced", "weeks": 4})
        assert resp.status_code == 404

    def test_plan_validation(self, client, fixture_png):
        est = self._estimate(client, fixture_png)
        resp = client.post(f"/api/v1/records/{est['record_id']}/plan",
                           json={"diet_type": "balanced", "weeks": 0})
        assert resp.status_code == 422
        resp = client.post(f"/api/v1/records/{est['record_id']}/plan",
                           json={"weeks": 4})
        assert resp.status_code == 422
        assert "diet_type" in resp.json()["message"]

    def test_infeasible_plan_carries_min_weeks(self, client, fixtures_dir):
        # subject 4 is far above ideal weight; a 1-week plan must breach
        # the calorie floor
        heavy = (fixtures_dir / "person_04.png").read_bytes()
        est = self._estimate(client, heavy)
        assert est["weight_kg"] - est["health"]["ideal_weight_kg"] > 1.0
        resp = client.post(f"/api/v1/records/{est['record_id']}/plan",
                           json={"diet_type": "balanced", "weeks": 1,
                                 "activity_level": "sedentary"})
        assert resp.status_code == 422
        body = resp.json()
        assert body["code"] == "PlanInfeasibleError"
        min_weeks = body["details"]["min_weeks"]
        assert min_weeks is not None and min_weeks > 1
        retry = client.post(f"/api/v1/records/{est['record_id']}/plan",
                            json={"diet_type": "balanced", "weeks": min_weeks,
                                  "activity_level": "sedentary"})
        assert retry.status_code == 200


class TestAdminReload:
    def test_requires_token(self, client):
        resp = client.post("/api/v1/admin/reload")
        assert resp.status_code == 401

    def test_reload_with_token(self, fixtures_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(ADMIN_TOKEN_ENV, "sekrit")
        app = create_app(_config(fixtures_dir, tmp_path))
        with TestClient(app) as c:
            denied = c.post("/api/v1/admin/reload", headers={"X-Admin-Token": "wrong"})
            assert denied.status_code == 401
            ok = c.post("/api/v1/admin/reload", headers={"X-Admin-Token": "sekrit"})
            assert ok.status_code == 200
            assert ok.json()["status"] == "reloaded"


class TestStore:
    def test_concurrent_appends_are_atomic(self, tmp_path):
        store = RecordStore(tmp_path / "s")

        def put(i):
            store.put_estimate({"record_id": f"r{i}", "weight_kg": i},
                               {"age_years": 20 + i}, f"digest{i}")
            return i

        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(put, range(64)))
        # every line in the log parses and every record is complete
        lines = (tmp_path / "s" / "records.jsonl").read_text().splitlines()
        assert len(lines) == 64
        for line in lines:
            entry = json.loads(line)
            assert set(entry) >= {"kind", "record_id", "created_at", "response"}
        reopened = RecordStore(tmp_path / "s")
        assert len(reopened.record_ids()) == 64

    def test_deleted_store_file_is_error(self, tmp_path):
        store = RecordStore(tmp_path / "s")
        store.put_estimate({"record_id": "a"}, {}, "d")
        os.remove(tmp_path / "s" / "records.jsonl")
        with pytest.raises(StorageError):
            store.get("a")

    def test_corrupt_store_reported(self, tmp_path):
        path = tmp_path / "s"
        path.mkdir()
        (path / "records.jsonl").write_text("{broken\n")
        with pytest.raises(StorageError):
            RecordStore(path)

    def test_plan_requires_existing_record(self, tmp_path):
        store = RecordStore(tmp_path / "s")
        with pytest.raises(StorageError):
            store.put_plan("ghost", {"weeks": 2})

    def test_image_blob_content_addressed(self, tmp_path):
        store = RecordStore(tmp_path / "s")
        d1 = store.put_image(b"pngbytes")
        d2 = store.put_image(b"pngbytes")
        assert d1 == d2
        assert (tmp_path / "s" / "blobs" / f"{d1}.png").read_bytes() == b"pngbytes"


class TestServiceConcurrency:
    def test_parallel_estimates_complete(self, fixtures_dir, tmp_path, fixture_png):
        app = create_app(_config(fixtures_dir, tmp_path))
        with TestClient(app) as client:
            def call(i):
                r = client.post("/api/v1/estimate",
                                files={"image": ("p.png", fixture_png, "image/png")},
                                data={"age_years": str(20 + i), "gender": "male"})
                assert r.status_code == 200
                return r.json()["record_id"]

            with concurrent.futures.ThreadPoolExecutor(max_workers=6) as pool:
                ids = list(pool.map(call, range(12)))
            for rid in ids:
                fetched = client.get(f"/api/v1/records/{rid}")
                assert fetched.status_code == 200
                assert fetched.json()["response"]["record_id"] == rid
