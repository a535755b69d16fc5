import numpy as np
import pytest

from _support import random_spec
from proscenium.core import DomainError, LayerId
from proscenium.transition import (
    BACK_TO_FRONT,
    FRONT_TO_BACK,
    EasingStyle,
    Envelope,
    PhaseSpec,
    TransitionSpec,
    evaluate_envelope,
    evaluate_transition,
    make_fade,
    make_transition,
    ramp,
)


def linear_env(start, end, duration=1.0, delay=0.0):
    return ramp(start, end, duration, EasingStyle.LINEAR, delay)


class TestEnvelope:
    def test_linear_boundaries(self):
        e = linear_env(0.0, 1.0)
        assert evaluate_envelope(e, 0.0) == 0.0
        assert evaluate_envelope(e, 1.0) == 1.0

    def test_equal_fraction_linear_midpoint(self):
        # Oracle: phases at thirds with boundary values 0, 1/3, 2/3, 1 make
        # the whole envelope the identity ramp, so t = d/2 gives 0.5.
        e = Envelope(
            phases=(
                PhaseSpec(1 / 3, EasingStyle.LINEAR, 0.0, 1 / 3),
                PhaseSpec(1 / 3, EasingStyle.LINEAR, 1 / 3, 2 / 3),
                PhaseSpec(1 / 3, EasingStyle.LINEAR, 2 / 3, 1.0),
            ),
            duration_s=2.0,
        )
        assert evaluate_envelope(e, 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_linear_ramp_is_globally_linear(self):
        e = linear_env(0.0, 1.0, duration=2.0)
        for t in np.linspace(0, 2, 41):
            assert evaluate_envelope(e, float(t)) == pytest.approx(t / 2.0, abs=1e-12)

    def test_delay_holds_start_value(self):
        e = linear_env(0.2, 0.9, duration=1.0, delay=0.5)
        assert evaluate_envelope(e, 0.0) == 0.2
        assert evaluate_envelope(e, 0.49) == 0.2
        assert evaluate_envelope(e, 1.5) == 0.9

    def test_continuity_at_phase_boundaries(self):
        rng = np.random.default_rng(21)
        from _support import random_envelope

        for _ in range(200):
            e = random_envelope(rng, 1.0, 0.0, duration=1.0, monotone=False)
            acc = 0.0
            for phase in e.phases[:-1]:
                acc += phase.fraction
                boundary = e.delay_s + acc * e.duration_s
                left = evaluate_envelope(e, boundary - 1e-9)
                right = evaluate_envelope(e, boundary + 1e-9)
                if all(p.style is not EasingStyle.HOLD for p in e.phases):
                    assert abs(left - right) < 1e-6

    def test_fraction_sum_enforced(self):
        with pytest.raises(DomainError):
            Envelope(
                phases=(
                    PhaseSpec(0.5, EasingStyle.LINEAR, 0, 0.5),
                    PhaseSpec(0.5, EasingStyle.LINEAR, 0.5, 0.8),
                    PhaseSpec(0.5, EasingStyle.LINEAR, 0.8, 1.0),
                ),
                duration_s=1.0,
            )

    def test_discontinuous_rejected(self):
        with pytest.raises(DomainError):
            Envelope(
                phases=(
                    PhaseSpec(0.25, EasingStyle.LINEAR, 0, 0.3),
                    PhaseSpec(0.5, EasingStyle.LINEAR, 0.31, 0.7),
                    PhaseSpec(0.25, EasingStyle.LINEAR, 0.7, 1.0),
                ),
                duration_s=1.0,
            )


class TestEasingStyles:
    @pytest.mark.parametrize("style", list(EasingStyle))
    def test_endpoints(self, style):
        assert style.apply(0.0) == 0.0 if style is not EasingStyle.HOLD else style.apply(0.0) == 0.0
        assert style.apply(1.0) == 1.0

    def test_hold_stays_at_zero(self):
        assert EasingStyle.HOLD.apply(0.999) == 0.0

    def test_smoothstep_midpoint(self):
        assert EasingStyle.SMOOTHSTEP.apply(0.5) == pytest.approx(0.5)


class TestDirectionalTransition:
    def test_boundary_start(self):
        s = make_transition(FRONT_TO_BACK, 1.0)
        st = evaluate_transition(s, 0.0)
        assert st.front.alpha == 1.0
        assert st.back.alpha == 0.0

    def test_boundary_end_with_lag(self):
        s = make_transition(FRONT_TO_BACK, 1.0, lag_s=0.4)
        st = evaluate_transition(s, 1.4)
        assert st.front.alpha == 0.0
        assert st.back.alpha == 1.0

    def test_linear_symmetric_midpoint_shows_both(self):
        s = make_transition(BACK_TO_FRONT, 1.0, style=EasingStyle.LINEAR)
        st = evaluate_transition(s, 0.5)
        assert st.front.alpha == pytest.approx(0.5, abs=1e-12)
        assert st.back.alpha == pytest.approx(0.5, abs=1e-12)

    def test_clamping_outside_range(self):
        s = make_transition(BACK_TO_FRONT, 1.0, lag_s=0.25)
        before = evaluate_transition(s, -3.0)
        at_zero = evaluate_transition(s, 0.0)
        assert before == at_zero
        after = evaluate_transition(s, 99.0)
        at_end = evaluate_transition(s, 1.25)
        assert after == at_end

    def test_lag_shift_identity(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            spec = random_spec(rng, allow_fades=False)
            if spec.lag_s == 0.0:
                continue
            no_lag = TransitionSpec(
                direction=spec.direction,
                duration_s=spec.duration_s,
                lag_s=0.0,
                parameters=spec.parameters,
                source_envelope=spec.source_envelope,
                dest_envelope=spec.dest_envelope,
            )
            for t in rng.uniform(0, spec.total_s, size=10):
                lagged = evaluate_transition(spec, float(t))
                shifted = evaluate_transition(no_lag, max(0.0, float(t) - spec.lag_s))
                dest = "front" if spec.direction.dest_layer is LayerId.FRONT else "back"
                assert getattr(lagged, dest) == getattr(shifted, dest)

    def test_monotone_alpha(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            spec = random_spec(rng, monotone=True, allow_fades=False)
            ts = np.linspace(0, spec.total_s, 50)
            src = "front" if spec.direction.source_layer is LayerId.FRONT else "back"
            dst = "back" if src == "front" else "front"
            src_alphas = [getattr(evaluate_transition(spec, float(t)), src).alpha for t in ts]
            dst_alphas = [getattr(evaluate_transition(spec, float(t)), dst).alpha for t in ts]
            assert all(a >= b - 1e-12 for a, b in zip(src_alphas, src_alphas[1:]))
            assert all(a <= b + 1e-12 for a, b in zip(dst_alphas, dst_alphas[1:]))

    def test_bounds_hold_for_overshooting_envelopes(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            spec = random_spec(rng, monotone=False)
            for t in rng.uniform(-0.5, spec.total_s + 0.5, size=20):
                st = evaluate_transition(spec, float(t))
                for p in (st.front, st.back):
                    assert 0.0 <= p.alpha <= 1.0
                    assert 0.0 <= p.shadow <= 1.0
                    assert p.scale > 0.0

    def test_scale_parameter_reaches_rest(self):
        s = make_transition(BACK_TO_FRONT, 1.0, parameters={"alpha", "scale"})
        end = evaluate_transition(s, 1.0)
        assert end.front.scale == 1.0
        start = evaluate_transition(s, 0.0)
        assert start.front.scale == pytest.approx(0.8)  # arrives smaller
        assert start.back.scale == 1.0  # source starts at rest

    def test_undriven_parameters_stay_at_rest(self):
        s = make_transition(BACK_TO_FRONT, 1.0, parameters={"alpha"})
        mid = evaluate_transition(s, 0.37)
        for p in (mid.front, mid.back):
            assert p.scale == 1.0
            assert p.shadow == 0.0
            assert p.offset_m == (0.0, 0.0)

    def test_shadow_only_on_front_layer(self):
        s = make_transition(BACK_TO_FRONT, 1.0, parameters={"alpha", "shadow"})
        end = evaluate_transition(s, 1.0)
        assert end.front.shadow == 1.0
        assert end.back.shadow == 0.0


class TestFades:
    def test_fade_in_starts_hidden(self):
        s = make_fade(LayerId.FRONT, fading_in=True, duration_s=1.0)
        st = evaluate_transition(s, 0.0)
        assert st.front.alpha == 0.0
        assert st.back.alpha == 0.0  # inactive layer stays hidden

    def test_fade_out_ends_hidden(self):
        s = make_fade(LayerId.BACK, fading_in=False, duration_s=1.0)
        st = evaluate_transition(s, 1.0)
        assert st.back.alpha == 0.0

    def test_linear_fade_quarter(self):
        s = make_fade(LayerId.FRONT, fading_in=True, duration_s=1.0,
                      style=EasingStyle.LINEAR)
        st = evaluate_transition(s, 0.25)
        assert st.front.alpha == pytest.approx(0.25, abs=1e-12)

    def test_fade_rejects_dest_envelope(self):
        from proscenium.transition import fade_in as fade_dir, ramp as mk

        with pytest.raises(DomainError):
            TransitionSpec(
                direction=fade_dir(LayerId.FRONT),
                duration_s=1.0,
                source_envelope=mk(0.0, 1.0, 1.0),
                dest_envelope=mk(0.0, 1.0, 1.0),
            )


class TestSpecValidation:
    def test_duration_positive(self):
        with pytest.raises(DomainError):
            make_transition(FRONT_TO_BACK, 0.0)

    def test_source_endpoints_enforced(self):
        with pytest.raises(DomainError):
            TransitionSpec(
                direction=FRONT_TO_BACK,
                duration_s=1.0,
                source_envelope=linear_env(0.5, 0.0),
                dest_envelope=linear_env(0.0, 1.0),
            )

    def test_envelope_cannot_exceed_duration(self):
        with pytest.raises(DomainError):
            TransitionSpec(
                direction=FRONT_TO_BACK,
                duration_s=1.0,
                source_envelope=linear_env(1.0, 0.0, duration=2.0),
                dest_envelope=linear_env(0.0, 1.0),
            )

    def test_unknown_parameter_rejected(self):
        with pytest.raises(DomainError):
            make_transition(FRONT_TO_BACK, 1.0, parameters={"alpha", "wobble"})

    def test_fade_direction_requires_layer(self):
        from proscenium.transition import Direction, DirectionKind

        with pytest.raises(DomainError):
            Direction(DirectionKind.FADE_IN)
