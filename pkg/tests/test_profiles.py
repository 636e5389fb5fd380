import dataclasses

import numpy as np
import pytest

from fedpart.env import CostWeights, energy_per_window, total_latency_ms
from fedpart.profiles import (
    CATEGORY_FULL_CLOUD,
    CATEGORY_FULL_PHONE,
    CATEGORY_FULL_SEW,
    CATEGORY_SEW_PHONE_CLOUD,
    DeviceProfile,
    ProfileError,
    ProfileSpec,
    config_count,
    enumerate_configs,
    extend_profile,
    load_profile,
    save_profile,
    synthesize_profile,
)


def brute_force_counts(p):
    """Independent enumeration: count placements of two ordered cuts in [0, p+1].

    Category membership is decided from the cut pair alone, without reusing
    the production enumeration logic.
    """
    full = single = double = 0
    for a in range(p + 2):
        for b in range(a, p + 2):
            real = {c for c in (a, b) if 1 <= c <= p}
            if not real:
                # only sentinel cuts: valid placements are all-SEW (p+1, p+1),
                # all-phone (0, p+1), all-cloud (0, 0)
                if (a, b) in ((p + 1, p + 1), (0, p + 1), (0, 0)):
                    full += 1
            elif len(real) == 1:
                single += 1
            else:
                double += 1
    return full, single, double


class TestEnumeration:
    @pytest.mark.parametrize(
        "p,total", [(12, 105), (0, 3), (18, 210), (1, 6), (2, 10)]
    )
    def test_counts(self, p, total):
        assert len(enumerate_configs(p)) == total
        assert config_count(p) == total

    def test_category_counts_at_12(self):
        skeletons = enumerate_configs(12)
        full = sum(s.category.startswith("full") for s in skeletons)
        double = sum(s.category == CATEGORY_SEW_PHONE_CLOUD for s in skeletons)
        single = len(skeletons) - full - double
        assert (full, single, double) == (3, 36, 66)

    @pytest.mark.parametrize("p", range(0, 31))
    def test_matches_brute_force(self, p):
        skeletons = enumerate_configs(p)
        full = sum(s.category.startswith("full") for s in skeletons)
        double = sum(s.category == CATEGORY_SEW_PHONE_CLOUD for s in skeletons)
        single = len(skeletons) - full - double
        assert (full, single, double) == brute_force_counts(p)
        assert full == 3 and single == 3 * p and double == p * (p - 1) // 2

    def test_order_is_stable_and_documented(self):
        skeletons = enumerate_configs(3)
        assert skeletons == enumerate_configs(3)
        assert [s.category for s in skeletons[:3]] == [
            CATEGORY_FULL_SEW,
            CATEGORY_FULL_PHONE,
            CATEGORY_FULL_CLOUD,
        ]
        doubles = [s for s in skeletons if s.category == CATEGORY_SEW_PHONE_CLOUD]
        assert [(s.cut_a, s.cut_b) for s in doubles] == [(1, 2), (1, 3), (2, 3)]

    def test_negative_cut_points_rejected(self):
        with pytest.raises(ProfileError):
            enumerate_configs(-1)


class TestSynthesis:
    def test_fully_local_endpoints(self, default_profile):
        local = default_profile.configs[0]
        assert local.mu1 == default_profile.total_flops
        assert local.delta12 == 0.0 and local.delta23 == 0.0
        assert local.t2 == 0.0 and local.t3 == 0.0

    def test_fully_offloaded_transfers_input(self, default_profile):
        cloud = default_profile.configs[2]
        assert cloud.delta12 == pytest.approx(default_profile.delta0)
        assert cloud.delta23 == pytest.approx(default_profile.delta0)
        assert cloud.mu3 == pytest.approx(default_profile.total_flops)

    def test_default_ranges(self, default_profile):
        for cfg in default_profile.configs:
            assert 0.0 <= cfg.t1 <= 450.0
            assert 0.0 <= cfg.t2 <= 65.0
            assert 0.0 <= cfg.t3 <= 30.0
            assert 0.0 <= cfg.delta12 <= 6.25
            assert 0.0 <= cfg.delta23 <= 6.25

    def test_flops_conservation(self, default_profile):
        for cfg in default_profile.configs:
            assert cfg.mu1 + cfg.mu2 + cfg.mu3 == pytest.approx(
                default_profile.total_flops, rel=1e-9
            )

    def test_same_seed_identical(self):
        spec = ProfileSpec(rng_seed=3)
        assert synthesize_profile(spec) == synthesize_profile(spec)

    def test_out_of_range_speeds_rejected(self):
        # a SEW this slow pushes t1 past the 450 ms bound
        spec = ProfileSpec(sew_mflops_per_ms=2.0)
        with pytest.raises(ProfileError, match="out-of-range"):
            synthesize_profile(spec)

    def test_device_profile_positivity(self):
        with pytest.raises(ProfileError):
            DeviceProfile(z_sew=0.0)


class TestExtend:
    def test_extend_to_210(self, default_profile):
        ext = extend_profile(default_profile, 210)
        assert ext.n_configs == 210
        for i in range(105, 210):
            src = ext.configs[i - 105]
            dup = ext.configs[i]
            assert dup.id == i
            assert dataclasses.replace(dup, id=src.id) == src

    def test_identity_when_target_matches(self, default_profile):
        assert extend_profile(default_profile, 105) is default_profile

    def test_smaller_target_rejected(self, default_profile):
        with pytest.raises(ProfileError):
            extend_profile(default_profile, 50)

    def test_duplicates_evaluate_identically(self, default_profile):
        """A duplicate must cost exactly the same as its source in any state."""
        ext = extend_profile(default_profile, 210)
        devices = DeviceProfile()
        weights = CostWeights(c_sew_max=1.0, c_phone_max=1.0, c_5g_max=1.0)
        rng = np.random.default_rng(0)
        for _ in range(50):
            i = int(rng.integers(105, 210))
            src, dup = ext.configs[i - 105], ext.configs[i]
            r_wifi = float(rng.uniform(1.0, 500.0))
            r_5g = float(rng.uniform(1.0, 300.0))
            cloud = float(rng.uniform(0.0, 60.0))
            assert total_latency_ms(dup, r_wifi, r_5g, cloud) == total_latency_ms(
                src, r_wifi, r_5g, cloud
            )
            assert energy_per_window(dup, r_wifi, r_5g, devices, weights) == (
                energy_per_window(src, r_wifi, r_5g, devices, weights)
            )


class TestFileFormat:
    def test_round_trip(self, default_profile, tmp_path):
        path = tmp_path / "p.profile"
        save_profile(default_profile, path)
        assert load_profile(path) == default_profile

    def test_extended_round_trip(self, default_profile, tmp_path):
        ext = extend_profile(default_profile, 140)
        path = tmp_path / "ext.profile"
        save_profile(ext, path)
        assert load_profile(path) == ext

    def test_wrong_config_count_rejected(self, default_profile, tmp_path):
        path = tmp_path / "bad.profile"
        truncated = dataclasses.replace(default_profile, configs=default_profile.configs[:50])
        save_profile(truncated, path)
        with pytest.raises(ProfileError, match="requires 105"):
            load_profile(path)

    def test_hand_written_three_config_file(self, tmp_path):
        path = tmp_path / "p0.profile"
        path.write_text(
            "name=by-hand\n"
            "cut_points=0\n"
            "delta0=1.5\n"
            "total_flops=100.0\n"
            "id,cut_a,cut_b,t1_ms,t2_ms,t3_ms,mu1,mu2,mu3,delta12_mb,delta23_mb\n"
            "0,1,1,50.0,0.0,0.0,100.0,0.0,0.0,0.0,0.0\n"
            "1,0,1,0.0,10.0,0.0,0.0,100.0,0.0,1.5,0.0\n"
            "2,0,0,0.0,0.0,5.0,0.0,0.0,100.0,1.5,1.5\n"
        )
        profile = load_profile(path)
        assert profile.n_configs == 3
        assert profile.configs[2].has_cloud_stage

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.profile"
        path.write_text(
            "name=x\ncut_points=0\ndelta0=1.0\ntotal_flops=1.0\n"
            "id,cut_a,cut_b,t1_ms,t2_ms,t3_ms,mu1,mu2,mu3,delta12_mb,delta23_mb\n"
            "0,1,1,oops\n"
        )
        with pytest.raises(ProfileError, match="line 6"):
            load_profile(path)
