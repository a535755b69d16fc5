"""Transition envelopes: how an entity's rendering moves between layers.

A transition drives each layer's render parameters from a per-layer
"presence" value produced by a three-phase easing envelope. Directional
transitions run a source envelope (presence 1 to 0) and a destination
envelope (0 to 1, optionally lagged); fades drive a single layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import DomainError, LayerId

PARAMETER_NAMES = ("alpha", "scale", "shadow", "offset")

# Apparent-depth emphasis used when "scale" is a driven parameter: content
# not yet resident on the front panel reads smaller, content that has moved
# toward the viewer reads larger on the back panel. The pair is reciprocal
# so a round trip is size-neutral.
SCALE_WHEN_HIDDEN = {LayerId.FRONT: 0.8, LayerId.BACK: 1.25}
# Driven "offset" slides the entity up 8 cm into its rest pose.
OFFSET_WHEN_HIDDEN_M = (0.0, -0.08)


class EasingStyle(Enum):
    LINEAR = "linear"
    EASE_IN = "ease_in"
    EASE_OUT = "ease_out"
    SMOOTHSTEP = "smoothstep"
    HOLD = "hold"

    def apply(self, u: float) -> float:
        """Normalized curve on [0, 1] with f(0)=0 and f(1)=1."""
        if self is EasingStyle.LINEAR:
            return u
        if self is EasingStyle.EASE_IN:
            return u * u
        if self is EasingStyle.EASE_OUT:
            return u * (2.0 - u)
        if self is EasingStyle.SMOOTHSTEP:
            return u * u * (3.0 - 2.0 * u)
        # HOLD: stay at the start value until the very end of the phase.
        return 1.0 if u >= 1.0 else 0.0


@dataclass(frozen=True)
class PhaseSpec:
    fraction: float
    style: EasingStyle
    start_value: float
    end_value: float

    def __post_init__(self) -> None:
        if not (self.fraction > 0.0):
            raise DomainError(f"phase fraction must be > 0, got {self.fraction!r}")
        if not (math.isfinite(self.start_value) and math.isfinite(self.end_value)):
            raise DomainError("phase values must be finite")


@dataclass(frozen=True)
class Envelope:
    """Exactly three contiguous phases spanning ``duration_s`` after ``delay_s``."""

    phases: tuple[PhaseSpec, PhaseSpec, PhaseSpec]
    duration_s: float
    delay_s: float = 0.0

    def __post_init__(self) -> None:
        if len(self.phases) != 3:
            raise DomainError(f"envelope needs exactly 3 phases, got {len(self.phases)}")
        if not (self.duration_s > 0.0):
            raise DomainError("envelope duration_s must be > 0")
        if self.delay_s < 0.0:
            raise DomainError("envelope delay_s must be >= 0")
        if abs(sum(p.fraction for p in self.phases) - 1.0) > 1e-9:
            raise DomainError("phase fractions must sum to 1")
        for a, b in zip(self.phases, self.phases[1:]):
            if a.end_value != b.start_value:
                raise DomainError(
                    f"discontinuous envelope: phase ends at {a.end_value!r}, "
                    f"next starts at {b.start_value!r}"
                )

    @property
    def start_value(self) -> float:
        return self.phases[0].start_value

    @property
    def end_value(self) -> float:
        return self.phases[2].end_value

    @property
    def total_s(self) -> float:
        return self.delay_s + self.duration_s


def evaluate_envelope(e: Envelope, t: float) -> float:
    """Envelope value at time ``t`` (seconds); clamps outside the active span."""
    local = t - e.delay_s
    if local <= 0.0:
        return e.start_value
    if local >= e.duration_s:
        return e.end_value
    u_total = local / e.duration_s
    acc = 0.0
    for i, phase in enumerate(e.phases):
        if u_total < acc + phase.fraction or i == 2:
            u = (u_total - acc) / phase.fraction
            u = min(max(u, 0.0), 1.0)
            return phase.start_value + (phase.end_value - phase.start_value) * phase.style.apply(u)
        acc += phase.fraction
    raise AssertionError("unreachable")


_DEFAULT_FRACTIONS = (0.25, 0.5, 0.25)
_SMOOTH_STYLES = (EasingStyle.EASE_OUT, EasingStyle.LINEAR, EasingStyle.EASE_IN)


def ramp(start: float, end: float, duration_s: float,
         style: EasingStyle | None = None, delay_s: float = 0.0) -> Envelope:
    """Three-phase envelope from ``start`` to ``end``.

    ``style=None`` gives the house curve (ease-out, linear, ease-in at
    fractions 0.25/0.5/0.25). A LINEAR style yields an exactly linear ramp;
    HOLD stays at ``start`` and jumps to ``end`` at the very end.
    """
    f1, f2, f3 = _DEFAULT_FRACTIONS
    if style is EasingStyle.HOLD:
        a, b = start, start
    else:
        span = end - start
        a = start + span * f1
        b = start + span * (f1 + f2)
    styles = _SMOOTH_STYLES if style is None else (style, style, style)
    return Envelope(
        phases=(
            PhaseSpec(f1, styles[0], start, a),
            PhaseSpec(f2, styles[1], a, b),
            PhaseSpec(f3, styles[2], b, end),
        ),
        duration_s=duration_s,
        delay_s=delay_s,
    )


class DirectionKind(Enum):
    FRONT_TO_BACK = "front_to_back"
    BACK_TO_FRONT = "back_to_front"
    FADE_IN = "fade_in"
    FADE_OUT = "fade_out"


@dataclass(frozen=True)
class Direction:
    kind: DirectionKind
    layer: LayerId | None = None

    def __post_init__(self) -> None:
        if self.is_fade and self.layer is None:
            raise DomainError("fade direction requires a layer")
        if not self.is_fade and self.layer is not None:
            raise DomainError("directional transition does not take a layer")

    @property
    def is_fade(self) -> bool:
        return self.kind in (DirectionKind.FADE_IN, DirectionKind.FADE_OUT)

    @property
    def source_layer(self) -> LayerId:
        if self.is_fade:
            return self.layer  # the single active layer
        return LayerId.FRONT if self.kind is DirectionKind.FRONT_TO_BACK else LayerId.BACK

    @property
    def dest_layer(self) -> LayerId:
        if self.is_fade:
            return self.layer
        return self.source_layer.other


FRONT_TO_BACK = Direction(DirectionKind.FRONT_TO_BACK)
BACK_TO_FRONT = Direction(DirectionKind.BACK_TO_FRONT)


def fade_in(layer: LayerId) -> Direction:
    return Direction(DirectionKind.FADE_IN, layer)


def fade_out(layer: LayerId) -> Direction:
    return Direction(DirectionKind.FADE_OUT, layer)


@dataclass(frozen=True)
class RenderParams:
    """Per-layer rendering parameters for one entity at one instant."""

    alpha: float = 1.0
    scale: float = 1.0
    shadow: float = 0.0
    offset_m: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha {self.alpha!r} outside [0, 1]")
        if not (self.scale > 0.0):
            raise DomainError(f"scale {self.scale!r} must be > 0")
        if not (0.0 <= self.shadow <= 1.0):
            raise DomainError(f"shadow {self.shadow!r} outside [0, 1]")


REST_VISIBLE = RenderParams(alpha=1.0)
REST_HIDDEN = RenderParams(alpha=0.0)


@dataclass(frozen=True)
class LayerRenderState:
    front: RenderParams = REST_HIDDEN
    back: RenderParams = REST_HIDDEN

    def for_layer(self, layer: LayerId) -> RenderParams:
        return self.front if layer is LayerId.FRONT else self.back


@dataclass(frozen=True)
class TransitionSpec:
    """Full parameterization of one transition.

    ``parameters`` selects which render parameters the envelopes drive;
    alpha is always driven (it is the presence itself). The destination
    envelope starts ``lag_s`` after the source envelope.
    """

    direction: Direction
    duration_s: float
    source_envelope: Envelope
    dest_envelope: Envelope | None = None
    lag_s: float = 0.0
    parameters: frozenset[str] = frozenset({"alpha"})
    separation_m: float | None = None

    def __post_init__(self) -> None:
        if not (self.duration_s > 0.0):
            raise DomainError("transition duration_s must be > 0")
        if self.lag_s < 0.0:
            raise DomainError("transition lag_s must be >= 0")
        bad = set(self.parameters) - set(PARAMETER_NAMES)
        if bad:
            raise DomainError(f"unknown transition parameters: {sorted(bad)}")
        if self.separation_m is not None and self.separation_m <= 0.0:
            raise DomainError("separation_m must be > 0")
        if self.direction.is_fade:
            if self.dest_envelope is not None:
                raise DomainError("fade transitions use a single envelope")
            lo, hi = (0.0, 1.0) if self.direction.kind is DirectionKind.FADE_IN else (1.0, 0.0)
            env = self.source_envelope
            if env.start_value != lo or env.end_value != hi:
                raise DomainError(f"fade envelope must run {lo} to {hi}")
        else:
            if self.dest_envelope is None:
                raise DomainError("directional transitions need both envelopes")
            if self.source_envelope.start_value != 1.0 or self.source_envelope.end_value != 0.0:
                raise DomainError("source envelope must run 1 to 0")
            if self.dest_envelope.start_value != 0.0 or self.dest_envelope.end_value != 1.0:
                raise DomainError("destination envelope must run 0 to 1")
        if self.source_envelope.total_s > self.duration_s + 1e-9:
            raise DomainError("source envelope exceeds transition duration")
        if self.dest_envelope is not None and self.dest_envelope.total_s > self.duration_s + 1e-9:
            raise DomainError("destination envelope exceeds transition duration")

    @property
    def total_s(self) -> float:
        return self.duration_s + self.lag_s


def make_transition(direction: Direction, duration_s: float, lag_s: float = 0.0,
                    parameters: frozenset[str] | set[str] = frozenset({"alpha"}),
                    style: EasingStyle | None = None,
                    source_envelope: Envelope | None = None,
                    dest_envelope: Envelope | None = None,
                    separation_m: float | None = None) -> TransitionSpec:
    """Directional transition with default envelopes filled in from ``style``."""
    if direction.is_fade:
        raise DomainError("use make_fade for fade directions")
    src = source_envelope or ramp(1.0, 0.0, duration_s, style)
    dst = dest_envelope or ramp(0.0, 1.0, duration_s, style)
    return TransitionSpec(
        direction=direction,
        duration_s=duration_s,
        lag_s=lag_s,
        parameters=frozenset(parameters),
        source_envelope=src,
        dest_envelope=dst,
        separation_m=separation_m,
    )


def make_fade(layer: LayerId, fading_in: bool, duration_s: float,
              style: EasingStyle | None = None) -> TransitionSpec:
    """Alpha-only fade of a single layer."""
    if not (duration_s > 0.0):
        raise DomainError("fade duration_s must be > 0")
    direction = fade_in(layer) if fading_in else fade_out(layer)
    env = ramp(0.0, 1.0, duration_s, style) if fading_in else ramp(1.0, 0.0, duration_s, style)
    return TransitionSpec(
        direction=direction,
        duration_s=duration_s,
        source_envelope=env,
        parameters=frozenset({"alpha"}),
    )


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


def _params_from_presence(presence: float, layer: LayerId, parameters: frozenset[str]) -> RenderParams:
    p = _clamp01(presence)
    alpha = p
    scale = 1.0
    if "scale" in parameters:
        hidden = SCALE_WHEN_HIDDEN[layer]
        scale = hidden + (1.0 - hidden) * p
    # Shadows emphasize nearness; only the front layer ever casts one.
    shadow = p if ("shadow" in parameters and layer is LayerId.FRONT) else 0.0
    if "offset" in parameters:
        ox, oy = OFFSET_WHEN_HIDDEN_M
        offset = ((1.0 - p) * ox, (1.0 - p) * oy)
    else:
        offset = (0.0, 0.0)
    return RenderParams(alpha=alpha, scale=scale, shadow=shadow, offset_m=offset)


def evaluate_transition(s: TransitionSpec, t: float) -> LayerRenderState:
    """Layer render parameters at time ``t`` since the transition began.

    ``t`` is clamped to [0, duration + lag]. The source layer follows the
    source envelope from t=0; the destination layer follows its envelope
    shifted by the lag.
    """
    tc = min(max(t, 0.0), s.total_s)
    ended = tc >= s.total_s
    if s.direction.is_fade:
        presence = (s.source_envelope.end_value if ended
                    else evaluate_envelope(s.source_envelope, tc))
        active = _params_from_presence(presence, s.direction.layer, s.parameters)
        if s.direction.layer is LayerId.FRONT:
            return LayerRenderState(front=active, back=REST_HIDDEN)
        return LayerRenderState(front=REST_HIDDEN, back=active)

    if ended:
        # The subtraction tc - lag can land one ulp short of the envelope
        # end; the boundary state must be exact.
        p_src = s.source_envelope.end_value
        p_dst = s.dest_envelope.end_value
    else:
        p_src = evaluate_envelope(s.source_envelope, tc)
        p_dst = evaluate_envelope(s.dest_envelope, tc - s.lag_s)
    src_params = _params_from_presence(p_src, s.direction.source_layer, s.parameters)
    dst_params = _params_from_presence(p_dst, s.direction.dest_layer, s.parameters)
    if s.direction.source_layer is LayerId.FRONT:
        return LayerRenderState(front=src_params, back=dst_params)
    return LayerRenderState(front=dst_params, back=src_params)
