import base64
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from conftest import default_intrinsics, orbit_cameras
from vcam.backends import HttpBackend, OracleBackend, decode_frame
from vcam.executor import execute
from vcam.formats import camera_to_dict, plan_to_dict, trajectory_to_dict, TrajectoryFile
from vcam.oracle import build_scene, render_ground_truth
from vcam.planner import PlannerConfig, make_plan
from vcam.server import make_server

INTR = default_intrinsics(20, 20)
SCENE_SEED = 7


@pytest.fixture(scope="module")
def server_url():
    server = make_server(port=0, scene_seed=SCENE_SEED)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def _get(url):
    with urllib.request.urlopen(url, timeout=30) as resp:
        return resp.status, json.loads(resp.read().decode())


def _post(url, body):
    data = json.dumps(body).encode()
    req = urllib.request.Request(url, data=data,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=120) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def _trajectory_body(n=30, inputs=1):
    cams = orbit_cameras(n, radius=2.0, intrinsics=INTR)
    roles = ("input",) * inputs + ("target",) * (n - inputs)
    return trajectory_to_dict(TrajectoryFile(cameras=tuple(cams), roles=roles))


class TestBasicEndpoints:
    def test_health(self, server_url):
        status, body = _get(server_url + "/api/health")
        assert status == 200 and body == {"status": "ok"}

    def test_presets_lists_schemas(self, server_url):
        status, body = _get(server_url + "/api/presets")
        kinds = {p["kind"] for p in body["presets"]}
        assert {"orbit", "spiral", "dolly_zoom"} <= kinds
        orbit = next(p for p in body["presets"] if p["kind"] == "orbit")
        assert "radius" in orbit["params"]

    def test_unknown_path_404(self, server_url):
        status, body = _post(server_url + "/api/nope", {})
        assert status == 404


class TestTrajectoryPreset:
    def test_orbit_preset(self, server_url):
        status, body = _post(server_url + "/api/trajectory/preset",
                             {"kind": "orbit",
                              "params": {"radius": 2.0, "frame_count": 4,
                                         "elevation": 0.0}})
        assert status == 200
        assert len(body["frames"]) == 4
        first = np.array(body["frames"][0]["pose"]).reshape(4, 4)
        assert np.abs(first[:3, 3] - np.array([2.0, 0, 0])).max() < 1e-9

    def test_unknown_kind_400(self, server_url):
        status, body = _post(server_url + "/api/trajectory/preset",
                             {"kind": "barrel"})
        assert status == 400 and "kind" in body["detail"]


class TestPlanEndpoint:
    def test_matches_cli_plan_path(self, server_url, tmp_path):
        from vcam.cli import main as cli_main
        from vcam.formats import load_json, save_json

        traj = _trajectory_body(n=7, inputs=2)
        status, body = _post(server_url + "/api/plan",
                             {"trajectory": traj,
                              "config": {"context_window": 21, "seed": 4}})
        assert status == 200
        traj_path = tmp_path / "traj.json"
        plan_path = tmp_path / "plan.json"
        save_json(traj, traj_path)
        assert cli_main(["plan", str(traj_path), "-T", "21", "--seed", "4",
                         "--out", str(plan_path)]) == 0
        assert body == load_json(plan_path)

    def test_small_context_window_400(self, server_url):
        status, body = _post(server_url + "/api/plan",
                             {"trajectory": _trajectory_body(),
                              "config": {"context_window": 2}})
        assert status == 400
        assert "context_window" in body["detail"]

    def test_missing_trajectory_400(self, server_url):
        status, body = _post(server_url + "/api/plan", {"config": {}})
        assert status == 400 and "trajectory" in body["detail"]


class TestPreviewEndpoint:
    def test_empty_view_preview_is_background(self, server_url):
        cam = {"pose": list(np.eye(4).reshape(-1)),
               "intrinsics": {"fx": 20.0, "fy": 20.0, "cx": 10.0, "cy": 10.0,
                              "width": 20, "height": 20}}
        cam["pose"][11] = 5.0  # translate +z, looking away from the scene
        status, body = _post(server_url + "/api/preview",
                             {"cameras": [cam], "scene_seed": SCENE_SEED})
        assert status == 200
        frame = decode_frame(body["frames"][0])
        assert (frame.rgb == np.array([20, 20, 20], dtype=np.uint8)).all()

    def test_preview_downscales(self, server_url):
        cams = orbit_cameras(1, radius=2.0,
                             intrinsics=default_intrinsics(64, 64))
        status, body = _post(server_url + "/api/preview",
                             {"cameras": [camera_to_dict(cams[0])], "max_dim": 16})
        assert status == 200
        frame = decode_frame(body["frames"][0])
        assert max(frame.width, frame.height) == 16


class TestRunEndpoint:
    def test_run_returns_frames_and_metrics(self, server_url):
        traj = _trajectory_body(n=9, inputs=1)
        status, plan_body = _post(server_url + "/api/plan",
                                  {"trajectory": traj,
                                   "config": {"context_window": 21}})
        assert status == 200
        status, body = _post(server_url + "/api/run",
                             {"plan": plan_body, "scene_seed": SCENE_SEED})
        assert status == 200
        assert len(body["frames"]) == 8
        assert "metrics" in body and "exact_frames" in body["metrics"]


class TestGenerateEndpoint:
    def test_http_backend_matches_local_oracle(self, server_url):
        scene = build_scene(SCENE_SEED)
        cams = orbit_cameras(10, radius=2.0, intrinsics=INTR)
        from vcam.planner import ViewRequest

        request = ViewRequest((cams[0],), tuple(cams[1:]), task="trajectory",
                              ordered_targets=True)
        plan = make_plan(request, PlannerConfig(context_window=8, seed=2))
        local = execute(plan, OracleBackend(scene))
        gt_inputs = [render_ground_truth(scene, c) for c in request.input_cameras]
        remote = execute(plan, HttpBackend(server_url), input_frames=gt_inputs)
        assert sorted(local.frames) == sorted(remote.frames)
        for k in local.frames:
            assert np.array_equal(local.frames[k].rgb, remote.frames[k].rgb)

    def test_malformed_body_400(self, server_url):
        status, body = _post(server_url + "/api/generate", {"conditioning": []})
        assert status == 400
