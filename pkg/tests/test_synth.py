import json
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as scipy_stats

from stifle_tpa.errors import GeometryOutOfBounds, InvalidConfig, InvalidInterval
from stifle_tpa.geometry import compute_tpa
from stifle_tpa.ingest import ClassRoleMap, load_case, load_manifest, ManifestEntry
from stifle_tpa.synth import (
    SynthConfig,
    batch_coordinate_arrays,
    draw_case_parameters,
    generate_batch,
    generate_case,
    noise_sweep,
    recover_angles,
    write_sweep_csv,
)


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


class TestGenerateCase:
    def test_zero_angle(self):
        config = SynthConfig(n_cases=1, seed=1)
        case = generate_case(0.0, 90.0, config)
        assert compute_tpa(case.landmarks).angle_deg == pytest.approx(0.0, abs=1e-9)

    def test_twenty_degree_roundtrip(self):
        config = SynthConfig(n_cases=1, seed=1)
        case = generate_case(20.0, 90.0, config)
        assert compute_tpa(case.landmarks).angle_deg == pytest.approx(20.0, abs=1e-9)
        assert case.tpa_gt == 20.0

    def test_out_of_bounds(self):
        config = SynthConfig(n_cases=1, seed=1, ftl_length=4000.0, image_size=(1000, 1000))
        with pytest.raises(GeometryOutOfBounds):
            generate_case(20.0, 90.0, config)

    def test_angle_out_of_domain(self):
        config = SynthConfig(n_cases=1, seed=1)
        with pytest.raises(InvalidConfig):
            generate_case(91.0, 0.0, config)

    def test_records_are_normalized_centroids(self):
        config = SynthConfig(n_cases=1, seed=1, image_size=(1000, 800))
        case = generate_case(25.0, 45.0, config)
        for record, point in zip(
            case.records,
            [
                case.landmarks.intercondylar_eminence,
                case.landmarks.talus_center,
                case.landmarks.mtpl_p1,
                case.landmarks.mtpl_p2,
            ],
        ):
            assert record.cx * 1000 == pytest.approx(point.x, abs=1e-9)
            assert record.cy * 800 == pytest.approx(point.y, abs=1e-9)
            assert record.w == 0.05 and record.h == 0.05


class TestConfig:
    def test_from_dict_defaults(self):
        config = SynthConfig.from_dict({"n_cases": 3, "seed": 7})
        assert config.tpa_range == (0.0, 45.0)
        assert config.ftl_length == 400.0
        assert config.image_size == (1024, 1024)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_cases": 0},
            {"tpa_range": (-1.0, 10.0)},
            {"tpa_range": (50.0, 10.0)},
            {"tpa_range": (0.0, 95.0)},
            {"ftl_orientation_range": (-10.0, 10.0)},
            {"ftl_length": 0.0},
            {"mtpl_halfspan": -5.0},
            {"noise_std": -1.0},
            {"image_size": (0, 100)},
        ],
    )
    def test_validation(self, overrides):
        doc = {"n_cases": 5, "seed": 1, **overrides}
        with pytest.raises(InvalidConfig):
            SynthConfig.from_dict(doc)


class TestBatch:
    def test_zero_noise_recovery(self):
        config = SynthConfig(n_cases=300, seed=4242)
        batch = generate_batch(config)
        worst = max(
            abs(compute_tpa(case.landmarks).angle_deg - case.tpa_gt) for case in batch.cases
        )
        assert worst < 1e-9

    def test_determinism_bit_exact_files(self, tmp_path):
        config = SynthConfig(n_cases=25, seed=7, noise_std=1.5)
        generate_batch(config, tmp_path / "a")
        generate_batch(config, tmp_path / "b")
        a = tree_bytes(tmp_path / "a")
        b = tree_bytes(tmp_path / "b")
        assert a.keys() == b.keys()
        assert all(a[k] == b[k] for k in a)

    def test_different_seed_changes_output(self, tmp_path):
        base = SynthConfig(n_cases=5, seed=7)
        other = SynthConfig(n_cases=5, seed=8)
        generate_batch(base, tmp_path / "a")
        generate_batch(other, tmp_path / "b")
        assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")

    def test_outputs_reingest_to_same_landmarks(self, tmp_path):
        config = SynthConfig(n_cases=8, seed=3, noise_std=2.0)
        batch = generate_batch(config, tmp_path)
        role_map = ClassRoleMap.load(tmp_path / "class_map.json")
        entries = {e.image_id: e for e in load_manifest(tmp_path / "manifest.json")}
        for case in batch.cases:
            loaded = load_case(entries[case.image_id], role_map)
            assert loaded.talus_center.x == pytest.approx(case.landmarks.talus_center.x, abs=1e-9)
            assert loaded.mtpl_p1.y == pytest.approx(case.landmarks.mtpl_p1.y, abs=1e-9)

    def test_truth_sidecar(self, tmp_path):
        config = SynthConfig(n_cases=4, seed=11, noise_std=0.5)
        batch = generate_batch(config, tmp_path)
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert [t["image_id"] for t in truth] == [c.image_id for c in batch.cases]
        for t, case in zip(truth, batch.cases):
            assert t["tpa_gt_deg"] == case.tpa_gt
            assert t["orientation_deg"] == case.orientation
            assert t["noise_std"] == 0.5

    def test_out_of_bounds_cases_skipped_and_counted(self):
        # tight image: many orientations push the talus outside
        config = SynthConfig(
            n_cases=50, seed=13, ftl_length=490.0, image_size=(1000, 1000),
            mtpl_halfspan=10.0, noise_std=30.0,
        )
        batch = generate_batch(config)
        assert len(batch.cases) + len(batch.skipped) == 50
        assert batch.skipped, "expected at least one out-of-bounds case"

    def test_draws_are_stable_across_calls(self):
        config = SynthConfig(n_cases=10, seed=5)
        a = draw_case_parameters(config)
        b = draw_case_parameters(config)
        for left, right in zip(a, b):
            np.testing.assert_array_equal(left, right)


class TestVectorizedPath:
    def test_matches_object_path(self):
        config = SynthConfig(n_cases=50, seed=21, noise_std=1.0)
        batch = generate_batch(config)
        tpa, coords, in_bounds = batch_coordinate_arrays(config)
        assert in_bounds.all()
        for i, case in enumerate(batch.cases):
            assert coords[i, 0, 0] == pytest.approx(case.landmarks.intercondylar_eminence.x, abs=1e-9)
            assert coords[i, 1, 1] == pytest.approx(case.landmarks.talus_center.y, abs=1e-9)
            assert coords[i, 3, 0] == pytest.approx(case.landmarks.mtpl_p2.x, abs=1e-9)
            assert tpa[i] == case.tpa_gt

    def test_recover_angles_matches_compute_tpa(self):
        config = SynthConfig(n_cases=100, seed=22, noise_std=3.0)
        batch = generate_batch(config)
        tpa, coords, in_bounds = batch_coordinate_arrays(config)
        recovered = recover_angles(coords)
        for i, case in enumerate(batch.cases):
            assert recovered[i] == pytest.approx(
                compute_tpa(case.landmarks).angle_deg, abs=1e-9
            )


class TestNoiseSweep:
    def test_zero_noise_row(self):
        config = SynthConfig(n_cases=500, seed=31)
        rows = noise_sweep(config, [0.0])
        assert rows[0].mean_abs_err < 1e-9
        assert rows[0].p95_err < 1e-9
        assert rows[0].n == 500

    def test_error_grows_with_noise(self):
        config = SynthConfig(n_cases=10000, seed=32)
        rows = noise_sweep(config, [1.0, 4.0])
        assert rows[1].mean_abs_err > rows[0].mean_abs_err

    def test_monotone_with_spearman(self):
        config = SynthConfig(n_cases=4000, seed=33)
        rows = noise_sweep(config, [0.0, 1.0, 2.0, 4.0])
        means = [r.mean_abs_err for r in rows]
        assert all(b >= a for a, b in zip(means, means[1:]))
        rho = scipy_stats.spearmanr([r.noise_std for r in rows], means).statistic
        assert rho > 0.9

    def test_empty_stds_rejected(self):
        config = SynthConfig(n_cases=10, seed=1)
        with pytest.raises(InvalidInterval):
            noise_sweep(config, [])

    def test_negative_std_rejected(self):
        config = SynthConfig(n_cases=10, seed=1)
        with pytest.raises(InvalidInterval):
            noise_sweep(config, [1.0, -0.5])

    def test_orientation_independence(self):
        # matched seeds: same target angles and unit noise, different orientations
        spinning = SynthConfig(n_cases=20000, seed=55, ftl_orientation_range=(0.0, 360.0))
        fixed = SynthConfig(n_cases=20000, seed=55, ftl_orientation_range=(90.0, 90.0))
        err_spinning = noise_sweep(spinning, [2.0])[0].mean_abs_err
        err_fixed = noise_sweep(fixed, [2.0])[0].mean_abs_err
        assert err_spinning == pytest.approx(err_fixed, rel=0.05)

    def test_csv_format(self, tmp_path):
        config = SynthConfig(n_cases=100, seed=12)
        rows = noise_sweep(config, [0.0, 1.0])
        out = tmp_path / "sweep.csv"
        write_sweep_csv(rows, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "std,mean_abs_err,p95_err,n"
        assert len(lines) == 3
        assert lines[1].endswith(",100")
