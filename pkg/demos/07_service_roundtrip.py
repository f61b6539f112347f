#!/usr/bin/env python3
"""Full service round trip against an in-process app instance.

Uploads a fixture photo, reads the estimate, requests a nutrition plan,
and fetches the stored record with its plan history.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from anthroscan.config import PipelineConfig
from anthroscan.service import create_app

FIXTURES = Path(__file__).parent.parent / "fixtures"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        config = PipelineConfig(
            params_path=str(FIXTURES / "params.bin"),
            calibration_path=str(FIXTURES / "calibration.json"),
            store_dir=str(Path(tmp) / "store"),
            base_dir=Path(tmp))
        app = create_app(config)
        with TestClient(app) as client:
            live = client.get("/api/v1/health").json()
            print(f"service up: {live}")

            image = (FIXTURES / "person_04.png").read_bytes()
            resp = client.post(
                "/api/v1/estimate",
                files={"image": ("person_04.png", image, "image/png")},
                data={"age_years": "36", "gender": "male",
                      "device_id": "phone-a"})
            estimate = resp.json()
            print("\nPOST /api/v1/estimate ->")
            print(json.dumps(estimate, indent=2, sort_keys=True))

            record_id = estimate["record_id"]
            first = client.post(
                f"/api/v1/records/{record_id}/plan",
                json={"diet_type": "balanced", "weeks": 8,
                      "activity_level": "moderate"})
            print(f"\nPOST /api/v1/records/{record_id}/plan (8 weeks) -> "
                  f"{first.status_code}")
            weeks = 8
            if first.status_code == 422:
                body = first.json()
                weeks = body["details"]["min_weeks"]
                print(f"infeasible: {body['message']}")
                print(f"retrying at the suggested {weeks} weeks")
            plan = client.post(
                f"/api/v1/records/{record_id}/plan",
                json={"diet_type": "balanced", "weeks": weeks,
                      "activity_level": "moderate"}).json()
            print(f"daily target {plan['daily_calorie_target']} kcal, "
                  f"{len(plan['weekly_weights_kg'])} weekly checkpoints")

            stored = client.get(f"/api/v1/records/{record_id}").json()
            print(f"\nGET /api/v1/records/{record_id} -> "
                  f"created_at {stored['created_at']}, "
                  f"{len(stored['plans'])} plan(s) on file")


if __name__ == "__main__":
    main()
