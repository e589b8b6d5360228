"""HTTP API tests over the FastAPI test client."""

import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from c3edit.cli import main
from c3edit.server import create_app


FAST_CONFIG = {"intra_iters": 4, "inter_iters_per_view": 1, "lift_steps": 6}


@pytest.fixture
def session_dir(tmp_path):
    scene = tmp_path / "scene.json"
    assert main(["make-scene", "--out", str(scene), "--views", "4", "--splats", "15",
                 "--seed", "1", "--resolution", "32"]) == 0
    config = tmp_path / "config.json"
    config.write_text(json.dumps(FAST_CONFIG))
    session = tmp_path / "sess"
    assert main(["init", "--scene", str(scene), "--prompt", "make it blue",
                 "--seed", "2", "--session", str(session), "--config", str(config)]) == 0
    assert main(["candidates", "--session", str(session)]) == 0
    return session


@pytest.fixture
def client(session_dir):
    return TestClient(create_app(session_dir))


def png_bytes(pixels):
    as_u8 = np.clip(np.round(pixels * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(as_u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def wait_for_job(client, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        progress = client.get("/api/progress").json()
        if progress["job"] and progress["job"]["state"] != "running":
            return progress
        time.sleep(0.05)
    raise TimeoutError("job did not finish")


class TestReads:
    def test_session_manifest(self, client):
        data = client.get("/api/session").json()
        assert data["phase"] == "candidates_ready"
        assert data["prompt"] == "make it blue"
        assert data["config"]["intra_iters"] == 4

    def test_candidates_listing(self, client):
        items = client.get("/api/candidates").json()
        assert len(items) == 4
        assert {c["view_id"] for c in items} == {0, 1, 2, 3}
        for item in items:
            image = client.get(item["image_url"])
            assert image.status_code == 200
            assert image.headers["content-type"] == "image/png"

    def test_render_endpoint(self, client):
        response = client.get("/api/images/renders/view0.png")
        assert response.status_code == 200

    def test_path_traversal_blocked(self, client):
        response = client.get("/api/images/../../etc/passwd")
        assert response.status_code in (400, 404)

    def test_missing_image_404(self, client):
        assert client.get("/api/images/nope.png").status_code == 404


class TestSelectGt:
    def test_select_by_json(self, client):
        response = client.post("/api/select-gt", json={"view_id": 2})
        assert response.status_code == 200
        assert client.get("/api/session").json()["gt_view_id"] == 2

    def test_upload_override(self, client, session_dir):
        payload = np.full((32, 32, 3), 0.75)
        response = client.post(
            "/api/select-gt",
            data={"view_id": "1"},
            files={"image": ("edit.png", png_bytes(payload), "image/png")},
        )
        assert response.status_code == 200
        stored = np.asarray(Image.open(session_dir / "gt.png"), dtype=np.float64) / 255.0
        assert np.array_equal(stored, np.round(payload * 255) / 255)

    def test_wrong_resolution_upload_rejected_with_dimensions(self, client):
        payload = np.full((16, 16, 3), 0.75)
        response = client.post(
            "/api/select-gt",
            data={"view_id": "1"},
            files={"image": ("edit.png", png_bytes(payload), "image/png")},
        )
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert "16" in detail and "32" in detail

    def test_wrong_phase_conflict(self, client):
        assert client.post("/api/select-gt", json={"view_id": 0}).status_code == 200
        response = client.post("/api/select-gt", json={"view_id": 1})
        assert response.status_code == 409
        assert "candidates_ready" in response.json()["detail"]


class TestPhaseJobs:
    def test_fit_job_runs_and_advances_phase(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        response = client.post("/api/phase/fit")
        assert response.status_code == 200
        progress = wait_for_job(client)
        assert progress["job"]["state"] == "done"
        assert client.get("/api/session").json()["phase"] == "gt_fitted"

    def test_wrong_phase_job_rejected(self, client):
        response = client.post("/api/phase/propagate")
        assert response.status_code == 409
        assert "gt_fitted" in response.json()["detail"]

    def test_unknown_phase_404(self, client):
        assert client.post("/api/phase/dance").status_code == 404

    def test_progress_iterations_increase(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        client.post("/api/phase/fit")
        seen = []
        deadline = time.time() + 120
        while time.time() < deadline:
            progress = client.get("/api/progress").json()
            if progress["progress"].get("iteration") is not None:
                seen.append(progress["progress"]["iteration"])
            if progress["job"] and progress["job"]["state"] != "running":
                break
            time.sleep(0.01)
        assert seen == sorted(seen)
        assert seen[-1] == 4

    def test_concurrent_jobs_conflict(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        first = client.post("/api/phase/fit")
        assert first.status_code == 200
        second = client.post("/api/phase/fit")
        assert second.status_code == 409
        wait_for_job(client)

    def test_select_gt_blocked_while_job_runs(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        client.post("/api/phase/fit")
        response = client.post("/api/select-gt", json={"view_id": 1})
        assert response.status_code == 409
        wait_for_job(client)


class TestMetricsAndLog:
    def _drive_to_edited(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        for phase in ("fit", "propagate", "edit"):
            assert client.post(f"/api/phase/{phase}").status_code == 200
            progress = wait_for_job(client)
            assert progress["job"]["state"] == "done", progress

    def test_metrics_require_edited(self, client):
        assert client.get("/api/metrics").status_code == 409

    def test_metrics_payload(self, client):
        self._drive_to_edited(client)
        data = client.get("/api/metrics").json()
        assert set(data) >= {"image_image_score", "image_text_score", "frechet_distance"}

    def test_losslog_streams_and_offsets(self, client):
        client.post("/api/select-gt", json={"view_id": 0})
        client.post("/api/phase/fit")
        wait_for_job(client)
        text = client.get("/api/losslog").text
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        assert len(lines) == 4
        assert all(row["phase"] == "fit" for row in lines)
        tail = client.get("/api/losslog", params={"start": 3}).text
        assert len(tail.splitlines()) == 1

    def test_cli_interoperates_with_api_state(self, client, session_dir):
        client.post("/api/select-gt", json={"view_id": 3})
        assert main(["fit", "--session", str(session_dir)]) == 0
        assert client.get("/api/session").json()["phase"] == "gt_fitted"
