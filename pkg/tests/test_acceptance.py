"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import contextlib
import json
import math
import time

import numpy as np
import pytest

from conftest import default_intrinsics, orbit_cameras, random_camera
from vcam.backends import OracleBackend
from vcam.cli import main as cli_main
from vcam.executor import execute, sweep_scale
from vcam.formats import (
    ManifestScene,
    SceneManifest,
    TrajectoryFile,
    load_json,
    manifest_from_dict,
    manifest_to_dict,
    plan_from_dict,
    plan_to_dict,
    report_from_dict,
    report_to_dict,
    trajectory_from_dict,
    trajectory_to_dict,
)
from vcam.geometry import (
    Camera,
    camera_rays,
    epipolar_sed,
    fundamental_matrix,
    normalize_scene,
    plucker_map,
    project,
    relative_to_first,
)
from vcam.metrics import MetricReport, cross_pass_disagreement, psnr, ssim
from vcam.oracle import Frame, build_scene, oracle_matches, render_ground_truth
from vcam.planner import (
    PlanError,
    PlannerConfig,
    ViewRequest,
    compute_stride,
    make_plan,
    validate_plan,
)


@contextlib.contextmanager
def criterion(name: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.perf_counter() - start:.1f}s)")
        raise
    print(f"ACCEPTANCE {name}: PASS ({time.perf_counter() - start:.1f}s)")


def test_stride_arithmetic():
    with criterion("stride-arithmetic"):
        assert compute_stride(100, 21) == 5
        assert compute_stride(100, 21, P=3, use_gt=True) == 6
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            Q = int(rng.integers(1, 1000))
            T = int(rng.integers(3, 64))
            P = int(rng.integers(1, 64))
            assert compute_stride(Q, T) == max(1, Q // (T - 2))
            if P < T - 2:
                assert compute_stride(Q, T, P, use_gt=True) == max(1, Q // (T - P - 2))
            else:
                with pytest.raises(PlanError):
                    compute_stride(Q, T, P, use_gt=True)


def _random_request(rng, P, Q, task):
    cams = orbit_cameras(P + Q, radius=float(rng.uniform(1.0, 3.0)),
                         elevation=float(rng.uniform(-0.5, 0.5)),
                         intrinsics=default_intrinsics(16, 16))
    return ViewRequest(tuple(cams[:P]), tuple(cams[P:]), task=task,
                       ordered_targets=task == "trajectory")


def _expected_infeasible(strategy, P, T, allow_ext):
    if strategy == "gt_interp" and P >= T - 2:
        return True
    if not allow_ext:
        if strategy in ("interp", "nearest", "gt_nearest") and P >= T - 1:
            return True
        if strategy == "gt_nearest" and P > T - 2:
            return True
        if P >= T:
            return True
    return False


def test_plan_invariant_suite():
    with criterion("plan-invariants"):
        rng = np.random.default_rng(7)
        strategies = ["one_pass", "nearest", "gt_nearest", "interp", "gt_interp", "auto"]
        planned = 0
        for _ in range(500):
            P = int(rng.integers(1, 41))
            Q = int(rng.integers(1, 601))
            T = int(rng.choice([8, 21]))
            task = str(rng.choice(["set", "trajectory"]))
            strategy = str(rng.choice(strategies))
            request = _random_request(rng, P, Q, task)
            config = PlannerConfig(context_window=T, strategy=strategy)
            resolved = strategy if strategy != "auto" else (
                "gt_nearest" if task == "set" else "interp")
            try:
                plan = make_plan(request, config)
            except PlanError:
                if P + Q <= T:
                    raise  # the padded single pass must always plan
                assert _expected_infeasible(resolved, P, T, P >= 9)
                continue
            planned += 1
            assert validate_plan(plan) == []
            covered = sorted(r.index for fp in plan.passes for r in fp.generation
                             if r.source == "target")
            assert covered == list(range(Q))
            for fp in plan.passes:
                if not fp.extended:
                    assert fp.size == T
            if resolved in ("interp", "gt_interp") and P + Q > T:
                # Segment granularity: oversized segments split into several
                # passes sharing the same anchor pair, so compare distinct
                # anchor pairs in path order.
                segments = []
                for fp in plan.passes:
                    if fp.kind != "chunk_pass":
                        continue
                    # Padding repeats the first anchor ref; dedupe it.
                    pair = tuple(sorted({r.index for r in fp.conditioning
                                         if r.source == "anchor"}))
                    if not segments or segments[-1] != pair:
                        segments.append(pair)
                for a, b in zip(segments, segments[1:]):
                    assert len(set(a) & set(b)) == 1
        assert planned >= 350


def _pass_cell_pins(result, pass_id):
    """cell key -> (pinning identity, color) for one pass's hallucinations."""
    pins = {}
    for k, meta in result.target_metadata.items():
        if result.target_pass[k] != pass_id:
            continue
        frame = result.frames[k]
        keys = meta.cell_keys()[meta.hallucinated]
        sources = meta.source_index[meta.hallucinated]
        colors = frame.rgb[meta.hallucinated]
        for key, src, color in zip(keys.tolist(), sources.tolist(), colors):
            pins.setdefault(key, (meta.identities[src], color.astype(float)))
    return pins


def test_consistency_mechanism():
    with criterion("consistency-mechanism"):
        intr = default_intrinsics(20, 20)
        shared_pin_hits = 0
        for seed in range(10):
            scene = build_scene(1000 + seed)
            backend = OracleBackend(scene)
            cams = orbit_cameras(81, radius=2.0, elevation=0.3, intrinsics=intr)
            request = ViewRequest((cams[0],), tuple(cams[1:]), task="trajectory",
                                  ordered_targets=True)
            interp_plan = make_plan(request, PlannerConfig(
                context_window=21, strategy="interp", seed=seed))
            one_pass_plan = make_plan(request, PlannerConfig(
                context_window=21, strategy="one_pass", seed=seed))
            interp_result = execute(interp_plan, backend)
            one_pass_result = execute(one_pass_plan, backend)
            interp = cross_pass_disagreement(interp_result, scene, adjacent_only=True)
            one_pass = cross_pass_disagreement(one_pass_result, scene,
                                               adjacent_only=True)
            assert one_pass.mean > 0.0, f"seed {seed}: one-pass shows no flicker"
            assert interp.mean < one_pass.mean, (
                f"seed {seed}: interp {interp.mean} !< one-pass {one_pass.mean}")

            # Every cell pinned by the same shared anchor frame in two chunk
            # passes agrees exactly.
            chunk_ids = [p.id for p in interp_plan.passes if p.kind == "chunk_pass"]
            pins = {pid: _pass_cell_pins(interp_result, pid) for pid in chunk_ids}
            for i, pa in enumerate(chunk_ids):
                for pb in chunk_ids[i + 1:]:
                    common = pins[pa].keys() & pins[pb].keys()
                    for key in common:
                        ident_a, color_a = pins[pa][key]
                        ident_b, color_b = pins[pb][key]
                        if ident_a == ident_b and not ident_a.startswith("g!"):
                            assert np.array_equal(color_a, color_b)
                            shared_pin_hits += 1
        assert shared_pin_hits > 0, "no shared-anchor-pinned cells over 10 seeds"

        # Non-vacuous mechanism check: two passes sharing one anchor frame
        # (as adjacent interp segments do) must agree on every cell that
        # anchor pins, and the pinning occurs.
        from vcam.oracle import ConditioningFrame, GenerationRequest, oracle_generate_detailed

        scene = build_scene(33)
        shared_cam = Camera(cams[0].pose, intr)
        shared = ConditioningFrame(camera=shared_cam,
                                   frame=render_ground_truth(scene, shared_cam))
        flank_a = orbit_cameras(8, radius=2.0, intrinsics=intr)[2]
        flank_b = orbit_cameras(8, radius=2.0, intrinsics=intr)[6]
        target = orbit_cameras(8, radius=2.0, intrinsics=intr)[4]
        req_a = GenerationRequest(
            conditioning=(shared, ConditioningFrame(
                camera=flank_a, frame=render_ground_truth(scene, flank_a))),
            target_cameras=(target,), seed=1)
        req_b = GenerationRequest(
            conditioning=(shared, ConditioningFrame(
                camera=flank_b, frame=render_ground_truth(scene, flank_b))),
            target_cameras=(target,), seed=2)
        fa, ma = oracle_generate_detailed(scene, req_a)
        fb, mb = oracle_generate_detailed(scene, req_b)
        pinned = (ma[0].hallucinated & (ma[0].source_index == 0)
                  & mb[0].hallucinated & (mb[0].source_index == 0))
        assert pinned.any()
        assert np.array_equal(fa[0].rgb[pinned], fb[0].rgb[pinned])


def test_memory_bank_loop_closure():
    with criterion("memory-bank-loop-closure"):
        intr = default_intrinsics(16, 16)
        for seed in range(5):
            scene = build_scene(4000 + seed)
            backend = OracleBackend(scene)
            cams = orbit_cameras(300, radius=2.0, loops=3.0, elevation=0.3,
                                 intrinsics=intr)
            request = ViewRequest((cams[0],), tuple(cams), task="trajectory",
                                  ordered_targets=True)

            results = {}
            plans = {}
            for mode in ("spatial", "temporal"):
                config = PlannerConfig(context_window=6, strategy="interp",
                                       seed=seed, allow_extension=False,
                                       retrieval_mode=mode, anchors_per_pass=2,
                                       retrieval_count=3)
                plans[mode] = make_plan(request, config)
                assert sum(p.kind == "anchor_pass" for p in plans[mode].passes) > 1
                results[mode] = execute(plans[mode], backend)

            anchor_targets = [t for t in plans["spatial"].anchor_target_indices
                              if t is not None]
            revisits = [(k, k + 100) for k in anchor_targets
                        if k + 100 in anchor_targets]
            assert revisits

            # Spatial retrieval: zero disagreement in bank-pinned cells at
            # revisited azimuths.
            spatial = results["spatial"]
            bank_checked = 0
            for a, b in revisits:
                ma, mb = spatial.target_metadata[a], spatial.target_metadata[b]
                fa, fb = spatial.frames[a], spatial.frames[b]
                both = ma.hallucinated & mb.hallucinated
                if not both.any():
                    continue
                keys = ma.cell_keys()
                for i, j in zip(*np.nonzero(both)):
                    ident_a = ma.identities[ma.source_index[i, j]]
                    ident_b = mb.identities[mb.source_index[i, j]]
                    if ident_a == ident_b and not ident_a.startswith("g!"):
                        assert np.array_equal(fa.rgb[i, j], fb.rgb[i, j])
                        bank_checked += 1
            # The mechanism is stronger than the criterion: revisited anchors
            # reproduce bit-exactly under spatial retrieval.
            from vcam.oracle import frame_hash

            for a, b in revisits:
                assert frame_hash(spatial.frames[a]) == frame_hash(spatial.frames[b])

            # Temporal ablation: co-hallucinated revisit pixels disagree.
            temporal = results["temporal"]
            diffs = []
            for a, b in revisits:
                ma, mb = temporal.target_metadata[a], temporal.target_metadata[b]
                both = ma.hallucinated & mb.hallucinated
                if both.any():
                    diffs.append(float(np.mean(np.abs(
                        temporal.frames[a].rgb[both].astype(float)
                        - temporal.frames[b].rgb[both].astype(float)))))
            assert diffs, f"seed {seed}: no co-hallucinated revisit pixels"
            assert float(np.mean(diffs)) > 10.0, (
                f"seed {seed}: temporal disagreement {np.mean(diffs)} <= 10")


def test_epipolar_suite():
    with criterion("epipolar-suite"):
        intr = default_intrinsics(24, 24)
        # Exact-F SED on ground-truth correspondences across 50 random scenes.
        for seed in range(50):
            scene = build_scene(2000 + seed)
            ring = orbit_cameras(12, radius=2.3, elevation=0.25, intrinsics=intr)
            cam_a, cam_b = ring[seed % 10], ring[seed % 10 + 1]
            matches = oracle_matches(scene, cam_a, cam_b, max_matches=128)
            F = fundamental_matrix(cam_a, cam_b)
            dists, mean = epipolar_sed(F, matches)
            assert dists.max() < 1e-6
        # Strict monotonicity in injected rotation noise.
        from scipy.spatial.transform import Rotation

        from vcam.geometry import Pose

        scene = build_scene(2999)
        ring = orbit_cameras(12, radius=2.3, elevation=0.25, intrinsics=intr)
        cam_a, cam_b = ring[0], ring[1]
        matches = oracle_matches(scene, cam_a, cam_b, max_matches=200)
        means = []
        axis = np.array([0.2, 0.7, 0.4])
        axis /= np.linalg.norm(axis)
        for angle in (1e-3, 1e-2, 1e-1):
            noise = Rotation.from_rotvec(axis * angle).as_matrix()
            noisy = Camera(Pose(cam_b.pose.rotation @ noise, cam_b.pose.translation),
                           cam_b.intrinsics)
            _, mean = epipolar_sed(fundamental_matrix(cam_a, noisy), matches)
            means.append(mean)
        assert means[0] < means[1] < means[2]


def test_metric_closed_forms():
    with criterion("metric-closed-forms"):
        black = Frame(width=12, height=12, rgb=np.zeros((12, 12, 3), dtype=np.uint8))
        white = Frame(width=12, height=12, rgb=np.full((12, 12, 3), 255, dtype=np.uint8))
        assert psnr(black, white) == 0.0
        rng = np.random.default_rng(5)
        x = Frame(width=16, height=16,
                  rgb=rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8))
        assert ssim(x, x) == 1.0
        for _ in range(100):
            a = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
            b = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
            total = 0.0
            for i in range(8):
                for j in range(8):
                    for c in range(3):
                        d = float(a[i, j, c]) - float(b[i, j, c])
                        total += d * d
            mse = total / (8 * 8 * 3)
            expected = 10.0 * math.log10(255.0 ** 2 / mse)
            got = psnr(Frame(width=8, height=8, rgb=a), Frame(width=8, height=8, rgb=b))
            assert abs(got - expected) < 1e-9


def test_scale_sweep_recovery():
    with criterion("scale-sweep-recovery"):
        intr = default_intrinsics(16, 16)
        grid = [float(u) for u in np.linspace(0.1, 2.0, 20)]
        for seed in range(5):
            scene = build_scene(3000 + seed)
            backend = OracleBackend(scene)
            cams = orbit_cameras(9, radius=3.0, elevation=0.25, intrinsics=intr)
            request = ViewRequest((cams[0],), tuple(cams[1:]), task="trajectory",
                                  ordered_targets=True)
            planted, _ = normalize_scene(
                relative_to_first(list(cams)), unit_length=0.7)
            refs = [render_ground_truth(scene, c) for c in planted[1:]]
            best, scores = sweep_scale(request, PlannerConfig(context_window=21,
                                                              seed=seed),
                                       backend, refs, grid=grid)
            step = grid[1] - grid[0]
            assert abs(best - 0.7) <= step + 1e-9, f"seed {seed}: best {best}"


def test_normalization_and_plucker_exactness(rng):
    with criterion("normalization-plucker"):
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            cams = [random_camera(rng, span=float(rng.uniform(0.5, 20.0)))
                    for _ in range(n)]
            unit = float(rng.uniform(0.1, 3.0))
            out, params = normalize_scene(cams, unit_length=unit)
            extent = max(np.abs(c.position).max() for c in out)
            assert abs(extent - unit) < 1e-12
        intr = default_intrinsics(32, 32)
        for _ in range(20):
            cam = random_camera(rng, intrinsics=intr)
            pm = plucker_map(cam)
            assert np.abs(np.linalg.norm(pm.directions, axis=-1) - 1.0).max() < 1e-9
            dots = np.einsum("ijk,ijk->ij", pm.directions, pm.moments)
            assert np.abs(dots).max() < 1e-9
            origin, dirs = camera_rays(cam)
            pts = origin[None, None, :] + 1.9 * dirs
            uv, z = project(cam, pts.reshape(-1, 3))
            u, v = np.meshgrid(np.arange(32) + 0.5, np.arange(32) + 0.5)
            expected = np.stack([u.ravel(), v.ravel()], axis=-1)
            assert (z > 0).all()
            assert np.abs(uv - expected).max() < 1e-6


def test_run_determinism(tmp_path, capsys):
    with criterion("run-determinism"):
        traj = tmp_path / "traj.json"
        assert cli_main(["preset", "orbit", "--n", "30", "--radius", "2",
                         "--width", "16", "--height", "16", "--out", str(traj)]) == 0
        plan = tmp_path / "plan.json"
        assert cli_main(["plan", str(traj), "--strategy", "interp",
                         "-T", "21", "--seed", "11", "--out", str(plan)]) == 0
        dirs = []
        for label in ("a", "b"):
            out = tmp_path / label
            assert cli_main(["run", str(plan), "--backend", "oracle",
                             "--scene-seed", "9", "--out", str(out)]) == 0
            report = tmp_path / f"report_{label}"
            assert cli_main(["eval", "--pred", str(out), "--ref", str(out),
                             "--traj", str(traj), "--scene-seed", "9",
                             "--out", str(report)]) == 0
            dirs.append((out, report))
        capsys.readouterr()
        (out_a, rep_a), (out_b, rep_b) = dirs
        names_a = sorted(p.name for p in out_a.iterdir())
        assert names_a == sorted(p.name for p in out_b.iterdir())
        for name in names_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
        for name in ("report.json", "report.csv"):
            assert (rep_a / name).read_bytes() == (rep_b / name).read_bytes(), name


def test_format_round_trips(rng):
    with criterion("format-round-trips"):
        intr = default_intrinsics(16, 16)
        for i in range(50):  # trajectory files
            n = int(rng.integers(2, 12))
            k = int(rng.integers(1, n))
            cams = tuple(random_camera(rng) for _ in range(n))
            traj = TrajectoryFile(cameras=cams,
                                  roles=("input",) * k + ("target",) * (n - k))
            body = json.loads(json.dumps(trajectory_to_dict(traj)))
            clone = trajectory_from_dict(body)
            assert trajectory_to_dict(clone) == trajectory_to_dict(traj)

        strategies = ["one_pass", "nearest", "gt_nearest", "interp", "gt_interp"]
        done = 0
        attempt = 0
        while done < 50:  # plan files
            attempt += 1
            P = int(rng.integers(1, 5))
            Q = int(rng.integers(1, 200))
            strategy = strategies[attempt % len(strategies)]
            task = "set" if "nearest" in strategy else "trajectory"
            request = _random_request(rng, P, Q, task)
            try:
                plan = make_plan(request, PlannerConfig(
                    context_window=int(rng.choice([8, 21])), strategy=strategy,
                    seed=int(rng.integers(1000))))
            except PlanError:
                continue
            body = json.loads(json.dumps(plan_to_dict(plan)))
            assert plan_to_dict(plan_from_dict(body)) == plan_to_dict(plan)
            done += 1

        for i in range(50):  # manifests
            scenes = tuple(
                ManifestScene(name=f"scene{j}",
                              trajectory_file=f"scenes/{j}.json",
                              reference_dir=None if j % 2 else f"refs/{j}",
                              split_tags=tuple(
                                  str(t) for t in rng.choice(
                                      ["small-viewpoint", "large-viewpoint", "hard"],
                                      size=int(rng.integers(0, 3)), replace=False)))
                for j in range(int(rng.integers(1, 6))))
            manifest = SceneManifest(scenes=scenes)
            body = json.loads(json.dumps(manifest_to_dict(manifest)))
            assert manifest_from_dict(body) == manifest

        for i in range(50):  # metric reports
            report = MetricReport()
            for name in ("psnr", "ssim", "tsed", "disagreement"):
                values = list(rng.uniform(0, 50, size=int(rng.integers(1, 12))))
                if rng.random() < 0.2:
                    values[0] = math.inf
                report.add(name, values)
            body = json.loads(json.dumps(report_to_dict(report)))
            clone = report_from_dict(body)
            assert clone.per_frame == report.per_frame
            assert clone.means == report.means
