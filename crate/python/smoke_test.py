#!/usr/bin/env python3
"""Smoke test for the airdigit_py extension module.

Builds are looked up under target/{release,debug}; run
`cargo build -p airdigit-py` (optionally --release) first.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def import_module():
    for profile in ("release", "debug"):
        built = ROOT / "target" / profile / "libairdigit_py.so"
        if built.is_file():
            stage = Path(tempfile.mkdtemp(prefix="airdigit-py-"))
            shutil.copy(built, stage / "airdigit_py.so")
            sys.path.insert(0, str(stage))
            import airdigit_py

            return airdigit_py
    sys.exit("build the extension first: cargo build -p airdigit-py")


def main():
    ad = import_module()

    # Signal path: constant survives the filter, resampling hits 100 samples,
    # features use the [x|y|z] layout.
    sig = ad.Signal3([1.0] * 200, [2.0] * 200, [3.0] * 200, 100.0)
    filtered = sig.lowpass()
    assert len(filtered) == 200
    assert abs(filtered.x()[50] - 1.0) < 1e-9
    resampled = filtered.resample_fourier(100)
    assert len(resampled) == 100 and abs(resampled.rate_hz() - 50.0) < 1e-9
    features = resampled.to_feature_values("accel")
    assert len(features) == 300
    assert abs(features[0] - 1.0) < 1e-9
    assert abs(features[150] - 2.0) < 1e-9
    assert abs(features[250] - 3.0) < 1e-9
    print("signal ops: OK")

    # Synthesis: ten distinct templates, 81-combination grid, deterministic
    # trajectories inside the duration envelope.
    assert len({tuple(ad.digit_template(d)[0]) for d in range(10)}) == 10
    assert len(ad.augmentation_grid(3)) == 81
    pts_a, rate = ad.synthesize_trajectory(3, seed=5)
    pts_b, _ = ad.synthesize_trajectory(3, seed=5)
    assert pts_a == pts_b and rate == 200.0
    assert 2.0 <= len(pts_a) / rate <= 4.0
    print("synthesis: OK")

    # Kinematics: FK/IK round trip and the rated reach.
    robot = ad.Robot()
    assert abs(robot.computed_max_reach() - 0.58) / 0.58 < 0.05
    joints = [0.2, 0.3, 0.4, -0.5, 0.6, 0.1]
    pos, quat = robot.fk(joints)
    solved = robot.ik(pos, quat, [q + 0.03 for q in joints])
    pos2, _ = robot.fk(list(solved))
    err = math.dist(pos, pos2)
    assert err < 1e-4, f"fk/ik round-trip error {err}"
    frames, frame_rate = robot.plan_digit(1, seed=3)
    poses = robot.replay(frames, frame_rate, 100.0)
    assert len(poses) == round(len(frames) / frame_rate * 100.0)
    print("kinematics: OK")

    # Tiny end-to-end pipeline run.
    config = {
        "grid_levels": 1,
        "human_per_digit": 1,
        "train": {
            "iterations": 2,
            "max_epochs": 2,
            "patience_epochs": 2,
            "hidden_width": 8,
        },
        "seed": 11,
    }
    with tempfile.TemporaryDirectory(prefix="airdigit-data-") as tmp:
        robot_n, human_n = ad.generate_dataset(tmp, json.dumps(config))
        assert (robot_n, human_n) == (10, 10), (robot_n, human_n)
        features_path, entry_count = ad.preprocess_dataset(tmp)
        assert entry_count == 60  # 20 samples x 3 channels
        mean, std, report = ad.train_on_features(
            features_path, str(Path(tmp) / "runs"), channel="vel"
        )
        assert 0.0 <= mean <= 1.0 and std >= 0.0
        text = ad.render_reports([report])
        assert "Velocity" in text and "Average accuracy" in text
    print(f"pipeline: OK (tiny-run mean accuracy {mean * 100:.1f}%)")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
