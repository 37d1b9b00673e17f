import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussinterf.core import NoiseChannel, Source
from gaussinterf.interferometer import (
    BS,
    OPA,
    ProcessParams,
    SchemeConfig,
    active_variances,
    expected_active,
    expected_direct,
    expected_passive,
    oracle_direct,
    oracle_expected,
)

FIG2 = ProcessParams(1.23, 0.63, 1.67)
FIG2_SOURCE = Source(5, 10)


def test_process_params_validation():
    with pytest.raises(ValueError):
        ProcessParams(0.9)
    with pytest.raises(ValueError):
        ProcessParams(1.2, d=-1)
    assert ProcessParams(1.0, Phi=7.0).Phi == pytest.approx(7.0 - 2 * math.pi)


def test_scheme_kinds():
    assert SchemeConfig.passive(0.3).kind == "passive"
    assert SchemeConfig.active(0.5).kind == "active"
    mixed = SchemeConfig(BS(0.3), OPA(0.5))
    assert mixed.kind == "mixed" and not mixed.interference_expected
    assert SchemeConfig.passive(0.0).degenerate and SchemeConfig.passive(1.0).degenerate
    with pytest.raises(ValueError):
        SchemeConfig.passive(0.3, efficiency=0.0)


class TestDirect:
    def test_vacuum(self):
        assert expected_direct(1.0, 1.0, 0.0) == 0.0

    def test_fig2_values(self):
        # single-mode propagation oracle: the published -1 offset is -1/2
        assert expected_direct(75, 1.23, 1.67) == pytest.approx(40.957517, abs=1e-6)
        assert expected_direct(75, 1.23, 1.67, form="printed") == pytest.approx(40.457517, abs=1e-6)
        assert oracle_direct(FIG2, FIG2_SOURCE) == pytest.approx(expected_direct(75, 1.23, 1.67), rel=1e-12)

    def test_squeezed_vacuum_is_sinh_squared(self):
        assert expected_direct(1.0, 2.0, 0.0) == pytest.approx(math.sinh(math.log(2.0)) ** 2)
        assert expected_direct(1.0, 2.0, 0.0) == pytest.approx(0.5625)


class TestPassive:
    def test_vacuum_identity(self):
        assert expected_passive(ProcessParams(), 1.0, 0.3) == (0.0, 0.0)

    def test_fig2_values(self):
        minus, plus = expected_passive(FIG2, 75.0, 0.3)
        # frozen from the moment-propagation oracle
        assert minus == pytest.approx(27.990304, abs=1e-6)
        assert plus == pytest.approx(38.705742, abs=1e-6)
        o = oracle_expected(SchemeConfig.passive(0.3), FIG2, FIG2_SOURCE)
        assert o == pytest.approx((minus, plus), rel=1e-12)

    def test_no_process_fringe(self):
        minus, _ = expected_passive(ProcessParams(), 75.0, 0.3)
        assert minus == pytest.approx(74 * math.sqrt(0.21))

    def test_noisy_forms_match_oracle(self):
        ch, pn = NoiseChannel(0.9, 1.1), NoiseChannel(0.8, 1.4)
        for kw in ({"channel_noise": ch}, {"process_noise": pn}, {"channel_noise": ch, "process_noise": pn}):
            scheme = SchemeConfig.passive(0.3, efficiency=0.7, **kw)
            for phi_ref in (0.0, math.pi / 2):
                o = oracle_expected(scheme, FIG2, FIG2_SOURCE, phi_ref)
                e = expected_passive(FIG2, 75.0, 0.3, phi_ref, kw.get("channel_noise"), kw.get("process_noise"), 0.7)
                assert o == pytest.approx(e, rel=1e-12)

    def test_calibration_round(self):
        # process bypassed: <i+> carries T (V + 1) / 2, not T V / 2
        scheme = SchemeConfig.passive(0.3, channel_noise=NoiseChannel(0.9, 1.1))
        minus, plus = oracle_expected(scheme, FIG2, FIG2_SOURCE, 0.0, with_process=False)
        assert minus == pytest.approx(0.9 * 74 * math.sqrt(0.21), rel=1e-12)
        assert minus == pytest.approx(30.519954, abs=1e-6)
        assert plus == pytest.approx(0.9 * 38 + 0.11 - 1, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(1.0, 3.0), st.floats(0.0, 2 * math.pi), st.floats(0.0, 5.0),
        st.floats(1.01, 1000.0), st.floats(0.05, 0.95), st.floats(0.0, 2 * math.pi),
    )
    def test_matches_oracle(self, q, Phi, d, V, mu, phi_ref):
        p = ProcessParams(q, Phi, d)
        o = oracle_expected(SchemeConfig.passive(mu), p, Source.thermal(V), phi_ref, nodes=16)
        e = expected_passive(p, V, mu, phi_ref)
        scale = max(1.0, abs(e[1]))
        assert abs(o[0] - e[0]) <= 1e-9 * scale and abs(o[1] - e[1]) <= 1e-9 * scale


class TestActive:
    def test_decoupled_limit(self):
        V = 75.0
        minus, plus = expected_active(ProcessParams(), V, 0.0, 0.0)
        assert minus == pytest.approx((V - 1) / 2) and plus == pytest.approx((V - 1) / 2)
        o = oracle_expected(SchemeConfig.active(0.0), ProcessParams(), FIG2_SOURCE, nodes=16)
        assert o == pytest.approx((minus, plus), rel=1e-12)

    def test_fig2_matches_oracle(self):
        scheme = SchemeConfig.active(0.5)
        for phi_ref in (0.0, math.pi / 2):
            o = oracle_expected(scheme, FIG2, FIG2_SOURCE, phi_ref, nodes=32)
            assert o == pytest.approx(expected_active(FIG2, 75.0, 0.5, 0.5, phi_ref), rel=1e-9)
            printed = expected_active(FIG2, 75.0, 0.5, 0.5, phi_ref, form="printed")
            assert abs(printed[0] - o[0]) > 1.0

    def test_two_mode_squeezed_vacuum(self):
        # identical OPAs with nothing between them compose to TMS(2r)
        r = 0.37
        minus, plus = oracle_expected(SchemeConfig.active(r), ProcessParams(), Source(1.0), nodes=32)
        assert minus == pytest.approx(0.0, abs=1e-12)
        assert plus == pytest.approx(2 * math.sinh(2 * r) ** 2, rel=1e-12)
        assert expected_active(ProcessParams(), 1.0, r)[1] == pytest.approx(plus, rel=1e-12)

    def test_variances(self):
        Vs, Vr = active_variances(75.0, 0.5)
        assert Vs == pytest.approx(math.cosh(0.5) ** 2 * 75 + math.sinh(0.5) ** 2)
        assert Vr == pytest.approx(math.sinh(0.5) ** 2 * 75 + math.cosh(0.5) ** 2)

    def test_noisy_forms_match_oracle(self):
        scheme = SchemeConfig.active(0.4, 0.6, channel_noise=NoiseChannel(0.85, 1.2), process_noise=NoiseChannel(0.9, 1.1))
        o = oracle_expected(scheme, FIG2, Source.thermal(30.0), 0.3, nodes=32)
        e = expected_active(FIG2, 30.0, 0.4, 0.6, 0.3, scheme.channel_noise, scheme.process_noise)
        assert o == pytest.approx(e, rel=1e-10)


def test_mixed_scheme_shows_no_fringe():
    for scheme in (SchemeConfig(BS(0.3), OPA(0.5)), SchemeConfig(OPA(0.5), BS(0.5))):
        values = [oracle_expected(scheme, ProcessParams(1.23, Phi, 1.67), FIG2_SOURCE, nodes=16)[0] for Phi in (0.0, 1.0, 2.5)]
        assert np.ptp(values) < 1e-9 * max(1.0, abs(values[0]))


@pytest.mark.parametrize("scheme", [SchemeConfig.passive(0.3), SchemeConfig.active(0.5)], ids=["passive", "active"])
def test_oracle_independent_of_alpha_beta(scheme):
    base = oracle_expected(scheme, FIG2, FIG2_SOURCE, 0.4, nodes=16)
    for alpha, beta in ((1.0, 0.0), (0.0, 2.0), (2.2, 4.1)):
        p = ProcessParams(1.23, 0.63, 1.67, alpha, beta)
        assert oracle_expected(scheme, p, FIG2_SOURCE, 0.4, nodes=16) == pytest.approx(base, rel=1e-12)


@settings(max_examples=50)
@given(st.floats(1.0, 5.0), st.floats(0, 2 * math.pi), st.floats(0, 5), st.floats(1, 500), st.floats(0.05, 0.95))
def test_q_inverse_symmetry(q, Phi, d, V, mu):
    a = SimpleNamespace(q=q, Phi=Phi, d=d)
    b = SimpleNamespace(q=1.0 / q, Phi=Phi, d=d)
    assert expected_passive(b, V, mu) == pytest.approx(expected_passive(a, V, mu), rel=1e-12, abs=1e-12)
    assert expected_active(b, V, 0.5) == pytest.approx(expected_active(a, V, 0.5), rel=1e-12, abs=1e-12)
    assert expected_direct(V, 1.0 / q, d) == pytest.approx(expected_direct(V, q, d), rel=1e-12)


def test_oracle_reports_nonconvergence():
    from gaussinterf.interferometer import QuadratureError

    # one node cannot average the phase-dependent terms
    with pytest.raises(QuadratureError):
        oracle_expected(SchemeConfig.active(0.5), FIG2, FIG2_SOURCE, nodes=1)
