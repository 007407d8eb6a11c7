import numpy as np
import pytest

from mimodsp.channel import draw_iid_rayleigh, gram, stream_rng
from mimodsp.equalization import (LinearCombiner, NsaConfig,
                                  NsaDivergenceWarning, WnsaConfig,
                                  apply_precoder, build_uplink_detector,
                                  cd_detect, chd_detect, combiner_exact,
                                  fit_wnsa_weights, mqrd_detect, nsa_inverse,
                                  post_combining_sinr, precode, wnsa_inverse)
from mimodsp.numerics import FxpOverlay


def _chan(rng, m=64, k=8):
    return draw_iid_rayleigh(m, k, rng)


class TestExactCombiners:
    def test_zf_inverts_channel(self, rng):
        g = _chan(rng)
        a = combiner_exact(g, "zf")
        assert np.allclose(np.conj(a.matrix.T) @ g, np.eye(8), atol=1e-10)

    def test_unit_gain_normalization(self, rng):
        g = _chan(rng)
        for method, nv in (("mr", 0.0), ("zf", 0.0), ("mmse", 0.1)):
            a = combiner_exact(g, method, nv)
            gains = np.diag(np.conj(a.matrix.T) @ g)
            assert np.allclose(gains, 1.0, atol=1e-10), method

    def test_mmse_direction(self, rng):
        # columns proportional to (Z + N0 I)^-1 G^H rows
        g = _chan(rng, 16, 4)
        nv = 0.5
        a = combiner_exact(g, "mmse", nv)
        raw = np.linalg.inv(gram(g) + nv * np.eye(4)) @ np.conj(g.T)
        for k in range(4):
            ratio = raw[k] / np.conj(a.matrix[:, k])
            assert np.allclose(ratio, ratio[0], atol=1e-8)

    def test_combine_applies_matrix(self, rng):
        g = _chan(rng, 16, 4)
        a = combiner_exact(g, "zf")
        y = rng.standard_normal((16, 5)) + 1j * rng.standard_normal((16, 5))
        assert np.allclose(a.combine(y), np.conj(a.matrix.T) @ y)

    def test_unknown_method(self, rng):
        with pytest.raises(ValueError):
            combiner_exact(_chan(rng), "dirty")


class TestPrecode:
    def test_sum_power_constraint(self, rng):
        g = _chan(rng, 32, 6)
        for method in ("mr", "zf", "rzf"):
            a = precode(g, method, total_power=3.0, ridge=0.1)
            assert np.linalg.norm(a.matrix) ** 2 == pytest.approx(3.0)

    def test_equal_user_gains(self, rng):
        g = _chan(rng, 32, 6)
        a = precode(g, "zf", total_power=2.0)
        gains = np.diag(g.T @ a.matrix)
        assert np.allclose(gains, gains[0], atol=1e-10)
        assert gains[0].real > 0

    def test_zf_removes_crosstalk(self, rng):
        g = _chan(rng, 32, 6)
        eff = g.T @ precode(g, "zf").matrix
        off = eff - np.diag(np.diag(eff))
        assert np.max(np.abs(off)) < 1e-10

    def test_single_user_mr_closed_form(self, rng):
        g = _chan(rng, 16, 1)
        a = precode(g, "mr", total_power=4.0)
        expected = np.conj(g) / np.linalg.norm(g) * 2.0
        assert np.allclose(a.matrix, expected, atol=1e-12)

    def test_apply_precoder(self, rng):
        g = _chan(rng, 16, 4)
        a = precode(g, "zf")
        x = rng.standard_normal((4, 7)) + 1j * rng.standard_normal((4, 7))
        assert np.allclose(apply_precoder(a, x), a.matrix @ x)


class TestSinr:
    def test_decreases_with_noise(self, rng):
        g = _chan(rng, 32, 4)
        a = combiner_exact(g, "zf")
        s1 = post_combining_sinr(a, g, 0.01)
        s2 = post_combining_sinr(a, g, 0.1)
        assert np.all(s1 > s2)

    def test_zf_perfect_csi_no_interference(self, rng):
        g = _chan(rng, 32, 4)
        a = combiner_exact(g, "zf")
        nv = 0.05
        sinr = post_combining_sinr(a, g, nv)
        # all residual power is noise: SINR = 1 / (nv ||a_k||^2)
        expected = 1.0 / (nv * np.sum(np.abs(a.matrix) ** 2, axis=0))
        assert np.allclose(sinr, expected, rtol=1e-8)


class TestNsa:
    def test_order_zero_is_diagonal_inverse(self, rng):
        z = gram(_chan(rng, 128, 8))
        approx = nsa_inverse(z, NsaConfig(order=0))
        assert np.allclose(approx, np.diag(1.0 / np.diag(z).real), atol=1e-12)

    def test_truncation_error_identity(self, rng):
        # residual I - Zhat^-1 Z equals the (L+1)th power of the iteration
        # matrix exactly, for every truncation order
        z = gram(_chan(rng, 128, 8))
        x = np.eye(8) - np.diag(1.0 / np.diag(z).real) @ z
        for order in (1, 2, 3, 5):
            approx = nsa_inverse(z, order)
            resid = np.eye(8) - approx @ z
            assert np.allclose(resid, np.linalg.matrix_power(x, order + 1),
                               atol=1e-10)

    def test_error_shrinks_with_order(self, rng):
        z = gram(_chan(rng, 128, 8))
        errs = [np.linalg.norm(nsa_inverse(z, o) @ z - np.eye(8))
                for o in (0, 2, 4, 8)]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_order_bounds(self):
        with pytest.raises(ValueError):
            NsaConfig(order=11)
        with pytest.raises(ValueError):
            NsaConfig(order=-1)

    def test_divergence_warning_when_crowded(self, master_seed):
        z = gram(draw_iid_rayleigh(16, 16, stream_rng(master_seed)))
        with pytest.warns(NsaDivergenceWarning):
            nsa_inverse(z, 3)


class TestWnsa:
    def test_scaled_identity_recovered(self):
        z = 4.0 * np.eye(5, dtype=complex)
        cfg = fit_wnsa_weights(z, order=3)
        assert np.allclose(wnsa_inverse(z, cfg), np.eye(5) / 4.0, atol=1e-10)

    @pytest.mark.filterwarnings(
        "ignore::mimodsp.equalization.NsaDivergenceWarning")
    def test_beats_plain_nsa_median(self, master_seed):
        errs_nsa, errs_wnsa = [], []
        for t in range(20):
            z = gram(draw_iid_rayleigh(64, 16, stream_rng(master_seed, t)))
            i = np.eye(16)
            errs_nsa.append(np.linalg.norm(nsa_inverse(z, 3) @ z - i))
            cfg = fit_wnsa_weights(z, 3)
            errs_wnsa.append(np.linalg.norm(wnsa_inverse(z, cfg) @ z - i))
        assert np.median(errs_wnsa) < np.median(errs_nsa)

    def test_weight_count(self, rng):
        z = gram(_chan(rng, 64, 8))
        cfg = fit_wnsa_weights(z, order=4)
        assert len(cfg.weights) == 5


def _sim_problem(rng, m=64, k=8, n=6, nv=0.05):
    g = _chan(rng, m, k)
    x = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    x /= np.sqrt(2.0)
    w = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
    y = g @ x + np.sqrt(nv / 2.0) * w
    return g, x, y


def _mmse_solution(g, y, nv):
    k = g.shape[1]
    return np.linalg.solve(gram(g) + nv * np.eye(k), np.conj(g.T) @ y)


class TestCd:
    def test_converges_to_regularized_solution(self, rng):
        g, _, y = _sim_problem(rng)
        nv = 0.05
        xhat = cd_detect(g, y, nv, sweeps=200)
        assert np.allclose(xhat, _mmse_solution(g, y, nv), atol=1e-8)

    def test_objective_never_increases(self, rng):
        g, _, y = _sim_problem(rng)
        cd_detect(g, y, 0.1, sweeps=6, check_objective=True)

    def test_more_sweeps_reduce_error(self, rng):
        g, _, y = _sim_problem(rng)
        nv = 0.05
        ref = _mmse_solution(g, y, nv)
        e1 = np.linalg.norm(cd_detect(g, y, nv, sweeps=1) - ref)
        e3 = np.linalg.norm(cd_detect(g, y, nv, sweeps=3) - ref)
        assert e3 < e1

    def test_requires_positive_noise(self, rng):
        g, _, y = _sim_problem(rng)
        with pytest.raises(ValueError):
            cd_detect(g, y, 0.0)

    def test_single_vector_shape(self, rng):
        g, _, y = _sim_problem(rng, n=1)
        out = cd_detect(g, y[:, 0], 0.1)
        assert out.shape == (8,)


class TestChd:
    def test_zf_matches_pinv(self, rng):
        g, _, y = _sim_problem(rng)
        xhat = chd_detect(g, y, mode="zf")
        assert np.allclose(xhat, np.linalg.pinv(g) @ y, atol=1e-9)

    def test_mmse_matches_closed_form(self, rng):
        g, _, y = _sim_problem(rng)
        nv = 0.2
        xhat = chd_detect(g, y, mode="mmse", noise_var=nv)
        assert np.allclose(xhat, _mmse_solution(g, y, nv), atol=1e-9)

    def test_unknown_mode(self, rng):
        g, _, y = _sim_problem(rng)
        with pytest.raises(ValueError):
            chd_detect(g, y, mode="qr")


class TestMqrd:
    def test_close_to_exact_when_dominant(self, rng):
        g, _, y = _sim_problem(rng, m=256, k=8)
        res = mqrd_detect(g, y)
        ref = np.linalg.pinv(g) @ y
        rel = np.linalg.norm(res.xhat - ref) / np.linalg.norm(ref)
        assert rel < 0.05
        assert res.reconstruction_error >= 0.0

    def test_reports_larger_error_when_crowded(self, master_seed):
        r = stream_rng(master_seed)
        wide = mqrd_detect(*_sim_problem(np.random.default_rng(r.integers(2**31)), 256, 8)[::2])
        tight = mqrd_detect(*_sim_problem(np.random.default_rng(r.integers(2**31)), 32, 16)[::2])
        assert tight.reconstruction_error > wide.reconstruction_error


class TestUplinkDetector:
    @pytest.mark.parametrize("method", ["mr", "zf", "mmse", "chd", "cd",
                                        "nsa", "wnsa", "mqrd"])
    def test_detect_matches_one_shot(self, rng, method):
        g, _, y = _sim_problem(rng)
        nv = 0.05
        det = build_uplink_detector(g, method, nv)
        out = det.detect(y)
        assert out.shape == (8, 6)
        if method == "chd":
            assert np.allclose(out, chd_detect(g, y, "mmse", nv), atol=1e-10)
        elif method == "cd":
            assert np.allclose(out, cd_detect(g, y, nv, sweeps=3), atol=1e-10)
        elif method in ("mr", "zf", "mmse"):
            ref = combiner_exact(g, method, nv).combine(y)
            assert np.allclose(out, ref, atol=1e-10)

    def test_nsa_solves_regularized_system(self, rng):
        # high order makes the truncated series an exact regularized solve
        g, _, y = _sim_problem(rng, m=256, k=8)
        nv = 0.1
        det = build_uplink_detector(g, "nsa", nv, nsa_order=10)
        assert np.allclose(det.detect(y), _mmse_solution(g, y, nv), atol=1e-4)

    def test_overlay_changes_output(self, rng):
        g, _, y = _sim_problem(rng)
        ov = FxpOverlay.from_fraction_bits(6, 6)
        a = build_uplink_detector(g, "chd", 0.05).detect(y)
        b = build_uplink_detector(g, "chd", 0.05, overlay=ov).detect(y)
        assert not np.allclose(a, b)
        assert np.linalg.norm(a - b) / np.linalg.norm(a) < 0.2

    def test_unknown_method(self, rng):
        g = _chan(rng)
        with pytest.raises(ValueError):
            build_uplink_detector(g, "magic", 0.1)

    def test_single_use_round_trip_shape(self, rng):
        g, _, y = _sim_problem(rng, n=1)
        det = build_uplink_detector(g, "chd", 0.05)
        assert det.detect(y[:, 0]).shape == (8,)
