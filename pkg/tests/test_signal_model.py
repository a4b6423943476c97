"""Signal-model tests: constellations, impairments, shaping, synthesis."""

import numpy as np
import pytest
from scipy.signal import welch

from rfsei.errors import ConfigurationError, NumericError
from rfsei.signal_model import (FILTER_SPAN_SYMBOLS, ImpairmentParams,
                                IqFrame, ModulationScheme, add_awgn,
                                apply_freq_offset, apply_iq_imbalance,
                                build_constellation, matched_filter_demod,
                                modulate, rrc_impulse, synthesize_frame)


ALL_SCHEMES = ([ModulationScheme("QAM", o) for o in (8, 16, 32, 64)]
               + [ModulationScheme("PSK", o) for o in (2, 4, 8, 16)])


class TestConstellations:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=str)
    def test_order_and_unit_power(self, scheme):
        points = build_constellation(scheme)
        assert len(points) == scheme.order
        assert len(np.unique(np.round(points, 9))) == scheme.order
        assert abs(np.mean(np.abs(points) ** 2) - 1.0) < 1e-12

    def test_bpsk_is_plus_minus_one(self):
        points = build_constellation(ModulationScheme("PSK", 2))
        assert sorted(np.round(points.real, 12)) == [-1.0, 1.0]
        assert np.all(points.imag == 0.0)

    def test_qpsk_on_unit_circle_at_odd_45deg(self):
        points = build_constellation(ModulationScheme("PSK", 4))
        np.testing.assert_allclose(np.abs(points), 1.0, atol=1e-12)
        angles = np.sort(np.degrees(np.angle(points)))
        np.testing.assert_allclose(angles, [-135, -45, 45, 135], atol=1e-9)

    def test_16qam_grid_scale(self):
        # independent oracle: the +/-1, +/-3 grid has mean power 10, so the
        # normalized constellation must be the grid scaled by 1/sqrt(10)
        grid = np.array([i + 1j * q for i in (-3, -1, 1, 3)
                         for q in (-3, -1, 1, 3)])
        assert abs(np.mean(np.abs(grid) ** 2) - 10.0) < 1e-12
        points = build_constellation(ModulationScheme("QAM", 16))
        expected = sorted(grid / np.sqrt(10.0), key=lambda z: (z.real, z.imag))
        got = sorted(points, key=lambda z: (z.real, z.imag))
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_unsupported_order_rejected(self):
        with pytest.raises(ConfigurationError):
            ModulationScheme("QAM", 128)
        with pytest.raises(ConfigurationError):
            ModulationScheme("PSK", 32)
        with pytest.raises(ConfigurationError):
            ModulationScheme("FSK", 2)


class TestIqImbalance:
    def test_zero_imbalance_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=64) + 1j * rng.normal(size=64)
        out = apply_iq_imbalance(x, 0.0, 0.0)
        assert np.array_equal(out, x)

    def test_pure_gain_hand_case(self):
        out = apply_iq_imbalance(np.array([1.0 + 0.0j]), 0.9, 0.0)
        np.testing.assert_allclose(out, [1.9 + 0.0j], atol=1e-15)

    def test_pure_phase_hand_case(self):
        # (1+0.0) * (cos30 + j sin30) * 1 + j*1 = 0.8660 + 1.5j
        out = apply_iq_imbalance(np.array([1.0 + 1.0j]), 0.0, 30.0)
        expected = np.cos(np.pi / 6) + 1j * (np.sin(np.pi / 6) + 1.0)
        np.testing.assert_allclose(out, [expected], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_linearity(self, seed):
        # the map is real-linear: I and Q transform independently, so real
        # scalar combinations commute with it
        rng = np.random.default_rng(seed)
        x = rng.normal(size=128) + 1j * rng.normal(size=128)
        y = rng.normal(size=128) + 1j * rng.normal(size=128)
        a, b = rng.normal(), rng.normal()
        alpha, theta = rng.uniform(-0.9, 0.9), rng.uniform(-10, 10)
        lhs = apply_iq_imbalance(a * x + b * y, alpha, theta)
        rhs = (a * apply_iq_imbalance(x, alpha, theta)
               + b * apply_iq_imbalance(y, alpha, theta))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_gain_only_scales_real_part(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=256) + 1j * rng.normal(size=256)
        out = apply_iq_imbalance(x, 0.4, 0.0)
        np.testing.assert_allclose(out.real, 1.4 * x.real, rtol=1e-15)
        assert np.array_equal(out.imag, x.imag)


class TestFreqOffset:
    def test_zero_offset_identity(self):
        x = np.arange(8) + 1j
        np.testing.assert_allclose(apply_freq_offset(x, 0.0), x, atol=0)

    def test_quarter_rate_cycles(self):
        out = apply_freq_offset(np.ones(8, dtype=complex), 0.25)
        expected = np.tile([1, 1j, -1, -1j], 2)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    @pytest.mark.parametrize("f", [-0.1, 0.013, 0.5])
    def test_magnitude_preserved(self, f):
        rng = np.random.default_rng(11)
        x = rng.normal(size=4096) + 1j * rng.normal(size=4096)
        out = apply_freq_offset(x, f)
        np.testing.assert_allclose(np.abs(out), np.abs(x), atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ConfigurationError):
            apply_freq_offset(np.ones(4, dtype=complex), 0.6)


class TestAwgn:
    def test_infinite_snr_is_identity(self):
        x = np.ones(32, dtype=complex)
        out = add_awgn(x, np.inf, 0)
        assert np.array_equal(out, x)

    def test_noise_power_calibration(self):
        x = np.ones(100_000, dtype=complex)
        noise = add_awgn(x, 0.0, 42) - x
        assert abs(np.mean(np.abs(noise) ** 2) - 1.0) < 0.03

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=512) + 1j * rng.normal(size=512)
        assert np.array_equal(add_awgn(x, 10.0, 7), add_awgn(x, 10.0, 7))

    def test_zero_power_rejected(self):
        with pytest.raises(NumericError):
            add_awgn(np.zeros(16, dtype=complex), 10.0, 0)

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            add_awgn(np.array([], dtype=complex), 10.0, 0)


class TestModulate:
    def test_empty_symbols_rejected(self):
        with pytest.raises(ConfigurationError):
            modulate(np.array([]), sps=2.0)

    def test_single_symbol_traces_the_pulse(self):
        # impulse response identity: one symbol yields the RRC pulse itself,
        # peaking at the filter delay, up to the power normalization scale
        sps = 4.0
        out = modulate(np.array([1.0 + 0.0j]), sps)
        delay = FILTER_SPAN_SYMBOLS / 2 * sps
        assert abs(np.argmax(np.abs(out)) - delay) <= 1
        tau = (np.arange(out.size) - delay) / sps
        expected = rrc_impulse(tau, 0.35)
        keep = np.abs(expected) > 0.1
        ratio = out.real[keep] / expected[keep]
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-3)

    def test_occupied_bandwidth_qpsk(self):
        # periodogram oracle on a long QPSK run; with rolloff 0.35 the band
        # where the PSD stays above 1% of its peak spans ~(1+0.35)*Rs
        rng = np.random.default_rng(5)
        sym = build_constellation(ModulationScheme("PSK", 4))[
            rng.integers(0, 4, size=10_000)]
        sps = 2.0
        out = modulate(sym, sps)
        freqs, psd = welch(out, fs=sps, nperseg=4096, return_onesided=False)
        occupied = np.abs(freqs[psd >= 0.01 * psd.max()])
        bandwidth = 2 * occupied.max()
        assert abs(bandwidth - 1.35) / 1.35 < 0.05

    @pytest.mark.parametrize("sps", [1.62, 2.0, 3.3, 5.4])
    def test_matched_filter_round_trip_evm(self, sps):
        rng = np.random.default_rng(9)
        scheme = ModulationScheme("QAM", 64)
        sym = build_constellation(scheme)[rng.integers(0, 64, size=400)]
        out = modulate(sym, sps)
        k = np.arange(40, 360)
        positions = (k + FILTER_SPAN_SYMBOLS / 2) * sps
        est = matched_filter_demod(out, sps, positions)
        scale = np.vdot(sym[k], est) / np.vdot(sym[k], sym[k])
        evm = np.sqrt(np.mean(np.abs(est / scale - sym[k]) ** 2)
                      / np.mean(np.abs(sym[k]) ** 2))
        assert evm < 0.01, f"EVM {evm:.4f} at sps={sps}"

    def test_unit_power_steady_state(self):
        rng = np.random.default_rng(2)
        sym = build_constellation(ModulationScheme("QAM", 16))[
            rng.integers(0, 16, size=2000)]
        out = modulate(sym, 2.7)
        guard = int(np.ceil(8 * 2.7))
        power = np.mean(np.abs(out[guard:-guard]) ** 2)
        assert abs(power - 1.0) < 0.01


class TestSynthesizeFrame:
    SCHEME = ModulationScheme("QAM", 16)

    def test_deterministic(self):
        params = ImpairmentParams(0.3, 5.0, 0.02, 2.5, 15.0)
        f1 = synthesize_frame(self.SCHEME, params, 1024, seed=77)
        f2 = synthesize_frame(self.SCHEME, params, 1024, seed=77)
        assert np.array_equal(f1.samples, f2.samples)
        f3 = synthesize_frame(self.SCHEME, params, 1024, seed=78)
        assert not np.array_equal(f1.samples, f3.samples)

    def test_round_trip_demod_clean_frame(self):
        # all-zero impairments at the top of the SNR range: matched-filter
        # demodulation must recover every transmitted symbol decision
        sps = 2.5
        params = ImpairmentParams(0.0, 0.0, 0.0, sps, 35.0)
        frame, debug = synthesize_frame(self.SCHEME, params, 2048, seed=5,
                                        return_debug=True)
        half_span = FILTER_SPAN_SYMBOLS / 2 * sps
        inside = np.where((debug.symbol_positions > half_span)
                          & (debug.symbol_positions < 2048 - half_span))[0]
        est = matched_filter_demod(frame.samples.astype(np.complex128), sps,
                                   debug.symbol_positions[inside])
        sent = debug.symbols[inside]
        scale = np.vdot(sent, est) / np.vdot(sent, sent)
        constellation = build_constellation(self.SCHEME)
        decided = np.argmin(np.abs(est[:, None] / scale
                                   - constellation[None, :]), axis=1)
        truth = np.argmin(np.abs(sent[:, None] - constellation[None, :]),
                          axis=1)
        assert np.array_equal(decided, truth)

    def test_mean_measured_snr(self):
        # per-frame SNR oracle via the noise-free reference copy
        params = ImpairmentParams(0.2, -3.0, 0.01, 2.0, 10.0)
        snrs = []
        for i in range(1500):
            frame, debug = synthesize_frame(self.SCHEME, params, 512,
                                            seed=9000 + i, return_debug=True)
            noise = frame.samples.astype(np.complex128) - debug.clean
            snrs.append(10 * np.log10(np.mean(np.abs(debug.clean) ** 2)
                                      / np.mean(np.abs(noise) ** 2)))
        assert abs(np.mean(snrs) - 10.0) < 0.2

    def test_imbalance_applied_before_offset_and_noise(self):
        # rebuild the frame from the clean reference of an unimpaired run:
        # imbalance acts on the baseband waveform first, then the rotation
        sps, f_norm, alpha, theta = 2.0, 0.05, 0.5, 8.0
        clean_params = ImpairmentParams(0.0, 0.0, 0.0, sps, 35.0)
        imp_params = ImpairmentParams(alpha, theta, f_norm, sps, 35.0)
        _, clean_dbg = synthesize_frame(self.SCHEME, clean_params, 512,
                                        seed=3, return_debug=True)
        _, imp_dbg = synthesize_frame(self.SCHEME, imp_params, 512, seed=3,
                                      return_debug=True)
        assert clean_dbg.crop_start == imp_dbg.crop_start
        n = np.arange(512) + imp_dbg.crop_start
        expected = (apply_iq_imbalance(clean_dbg.clean, alpha, theta)
                    * np.exp(2j * np.pi * f_norm * n))
        np.testing.assert_allclose(imp_dbg.clean, expected, atol=1e-9)

    def test_finite_samples_and_frame_fields(self):
        params = ImpairmentParams(-0.9, 10.0, -0.1, 5.4, 0.0)
        frame = synthesize_frame(ModulationScheme("PSK", 8), params, 512,
                                 seed=1)
        assert isinstance(frame, IqFrame)
        assert frame.samples.shape == (512,)
        assert frame.samples.dtype == np.complex64
        assert np.all(np.isfinite(frame.samples.view(np.float32)))

    def test_param_validation(self):
        with pytest.raises(ConfigurationError):
            ImpairmentParams(1.0, 0.0, 0.0, 2.0, 10.0)
        with pytest.raises(ConfigurationError):
            ImpairmentParams(0.0, 11.0, 0.0, 2.0, 10.0)
        with pytest.raises(ConfigurationError):
            ImpairmentParams(0.0, 0.0, 0.2, 2.0, 10.0)
        with pytest.raises(ConfigurationError):
            ImpairmentParams(0.0, 0.0, 0.0, 0.9, 10.0)
        with pytest.raises(ConfigurationError):
            ImpairmentParams(0.0, 0.0, 0.0, 2.0, 40.0)
