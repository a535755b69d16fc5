"""Deterministic fixed-timestep engine behind live sessions and batch renders.

The engine advances in 1/30 s ticks. Time is always derived from the tick
counter, never accumulated, and every state change flows through either
``step`` (sensor samples, binding edges) or ``handle_command`` (operator
commands), both of which are logged so any session replays bit-exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import calibration as cal
from .compositor import (
    CompositeFrame,
    OpticalModel,
    SceneEntity,
    Viewpoint,
    composite,
    render_layers,
)
from .core import (
    DisplayGeometry,
    DomainError,
    LayerId,
    PixelBuffer,
    read_pam,
    read_ppm,
    read_text_file,
)
from .linking import BinaryMask
from .profile import (
    BindingDecl,
    ConditionKind,
    ExperienceProfile,
    ParseError,
    Zone,
    ZoneConfig,
    parse_profile,
)
from .transition import (
    LayerRenderState,
    RenderParams,
    REST_HIDDEN,
    REST_VISIBLE,
    TransitionSpec,
    evaluate_transition,
)

logger = logging.getLogger(__name__)

TICK_RATE_HZ = 30
DT = 1.0 / TICK_RATE_HZ
HAND_JOINTS = 27


# ---------------------------------------------------------------------------
# Sensor samples

@dataclass(frozen=True)
class HandFrame:
    """Two hands, 27 joints each, in sensor coordinates (meters)."""

    joints: np.ndarray  # (2, 27, 3)

    def __post_init__(self) -> None:
        arr = np.asarray(self.joints, dtype=np.float64)
        if arr.shape != (2, HAND_JOINTS, 3):
            raise DomainError(f"hand frame must be (2, {HAND_JOINTS}, 3), got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "joints", arr)


@dataclass(frozen=True)
class DepthFrame:
    """Depth map in meters; NaN marks invalid pixels."""

    depths: np.ndarray  # (h, w)

    def __post_init__(self) -> None:
        arr = np.asarray(self.depths, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError(f"depth frame must be 2-D, got {arr.shape}")
        valid = ~np.isnan(arr)
        if (arr[valid] < 0).any():
            raise DomainError("depths must be >= 0 or NaN")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "depths", arr)


@dataclass(frozen=True)
class UserDistance:
    distance_m: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.distance_m) and self.distance_m >= 0):
            raise DomainError("distance must be finite and >= 0")


SensorSample = HandFrame | DepthFrame | UserDistance


# ---------------------------------------------------------------------------
# Commands

@dataclass(frozen=True)
class Trigger:
    cue: str


@dataclass(frozen=True)
class SetEye:
    eye: tuple[float, float, float]


@dataclass(frozen=True)
class SetSeparation:
    separation_m: float


@dataclass(frozen=True)
class SetParam:
    path: str
    value: float


@dataclass(frozen=True)
class LoadProfile:
    text: str


@dataclass(frozen=True)
class Step:
    n: int


@dataclass(frozen=True)
class Query:
    topic: str = "all"


Command = Trigger | SetEye | SetSeparation | SetParam | LoadProfile | Step | Query


def command_to_wire(cmd: Command) -> dict:
    if isinstance(cmd, Trigger):
        return {"cmd": "trigger", "cue": cmd.cue}
    if isinstance(cmd, SetEye):
        return {"cmd": "set_eye", "eye": list(cmd.eye)}
    if isinstance(cmd, SetSeparation):
        return {"cmd": "set_separation", "separation_m": cmd.separation_m}
    if isinstance(cmd, SetParam):
        return {"cmd": "set_param", "path": cmd.path, "value": cmd.value}
    if isinstance(cmd, LoadProfile):
        return {"cmd": "load_profile", "text": cmd.text}
    if isinstance(cmd, Step):
        return {"cmd": "step", "n": cmd.n}
    if isinstance(cmd, Query):
        return {"cmd": "query", "topic": cmd.topic}
    raise DomainError(f"unknown command {cmd!r}")


def command_from_wire(obj: dict) -> Command:
    """Parse a wire-format command object; raises DomainError when malformed."""
    if not isinstance(obj, dict):
        raise DomainError("command must be a JSON object")
    name = obj.get("cmd")
    if name == "trigger":
        cue = obj.get("cue")
        if not isinstance(cue, str):
            raise DomainError("trigger needs a string 'cue'")
        return Trigger(cue)
    if name == "set_eye":
        eye = obj.get("eye")
        if (not isinstance(eye, (list, tuple)) or len(eye) != 3
                or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in eye)):
            raise DomainError("set_eye needs 'eye' as [x, y, z]")
        return SetEye((float(eye[0]), float(eye[1]), float(eye[2])))
    if name == "set_separation":
        v = obj.get("separation_m")
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DomainError("set_separation needs a numeric 'separation_m'")
        return SetSeparation(float(v))
    if name == "set_param":
        path, value = obj.get("path"), obj.get("value")
        if not isinstance(path, str) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise DomainError("set_param needs a string 'path' and numeric 'value'")
        return SetParam(path, float(value))
    if name == "load_profile":
        text = obj.get("text")
        if not isinstance(text, str):
            raise DomainError("load_profile needs string 'text'")
        return LoadProfile(text)
    if name == "step":
        n = obj.get("n", 1)
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise DomainError("step needs a non-negative integer 'n'")
        return Step(n)
    if name == "query":
        topic = obj.get("topic", "all")
        if not isinstance(topic, str):
            raise DomainError("query topic must be a string")
        return Query(topic)
    raise DomainError(f"unknown command {name!r}")


# ---------------------------------------------------------------------------
# Pure sensor operations

def classify_proximity(d: float, z: ZoneConfig) -> Zone:
    """Hall-style zone for a distance: personal, social, or public.

    Half-open bands, lower boundary belonging to the outer zone.
    """
    if d < 0 or not math.isfinite(d):
        raise DomainError(f"distance must be finite and >= 0, got {d!r}")
    if d < z.personal_max_m:
        return Zone.PERSONAL
    if d < z.social_max_m:
        return Zone.SOCIAL
    return Zone.PUBLIC


def depth_segment(f: DepthFrame, rgb: PixelBuffer, threshold_m: float) -> tuple[BinaryMask, BinaryMask]:
    """Split pixels at a depth threshold: (closer-than, at-or-beyond).

    Invalid (NaN) depths belong to neither mask.
    """
    if f.depths.shape != (rgb.height_px, rgb.width_px):
        raise DomainError(
            f"depth {f.depths.shape} and rgb {(rgb.height_px, rgb.width_px)} dimensions differ")
    valid = ~np.isnan(f.depths)
    front = valid & (f.depths < threshold_m)
    back = valid & (f.depths >= threshold_m)
    return BinaryMask(front), BinaryMask(back)


def ingest_hand(h: HandFrame, T: cal.SimilarityTransform | None,
                g: DisplayGeometry) -> tuple[np.ndarray, float]:
    """Map a hand frame into display space; returns joints and the nearest
    joint distance to the front display plane (z = 0)."""
    if T is None:
        raise DomainError("hand ingestion requires a loaded calibration")
    mapped = cal.apply(T, h.joints.reshape(-1, 3)).reshape(h.joints.shape)
    distance = float(np.abs(mapped[..., 2]).min())
    return mapped, distance


# ---------------------------------------------------------------------------
# Asset loading

def load_asset_frames(profile: ExperienceProfile, root: str | Path) -> dict[str, tuple[PixelBuffer, ...]]:
    """Read every declared asset; missing or unreadable files are domain errors."""
    root = Path(root)
    frames: dict[str, tuple[PixelBuffer, ...]] = {}
    for name, decl in profile.assets.items():
        loaded = []
        for rel in decl.paths:
            path = root / rel
            if not path.exists():
                raise DomainError(f"asset '{name}': missing file {path}")
            suffix = path.suffix.lower()
            if suffix == ".pam":
                loaded.append(read_pam(path))
            elif suffix == ".ppm":
                loaded.append(read_ppm(path))
            else:
                raise DomainError(f"asset '{name}': unsupported format {suffix!r}")
        frames[name] = tuple(loaded)
    return frames


# ---------------------------------------------------------------------------
# Engine

@dataclass
class ActiveTransition:
    cue: str
    target: str
    spec: TransitionSpec
    start_time_s: float
    initial: LayerRenderState


def _initial_params(profile: ExperienceProfile) -> dict[str, LayerRenderState]:
    out: dict[str, LayerRenderState] = {}
    for name, decl in profile.entities.items():
        if decl.layer is LayerId.FRONT:
            out[name] = LayerRenderState(front=REST_VISIBLE, back=REST_HIDDEN)
        else:
            out[name] = LayerRenderState(front=REST_HIDDEN, back=REST_VISIBLE)
    return out


def _lerp_component(raw: float, raw0: float, raw1: float, init: float,
                    lo: float | None = None, hi: float | None = None) -> float:
    # Follow the envelope's normalized progress, but launch from the latched
    # value so preempting a live transition does not pop. The endpoints are
    # returned exactly so retirement latches the true end state.
    if raw1 != raw0:
        if raw == raw1:
            v = raw1
        elif raw == raw0:
            v = init
        else:
            q = (raw - raw0) / (raw1 - raw0)
            v = init + q * (raw1 - init)
    else:
        v = raw
    if lo is not None:
        v = max(v, lo)
    if hi is not None:
        v = min(v, hi)
    return v


def _remap_params(raw: RenderParams, raw0: RenderParams, raw1: RenderParams,
                  init: RenderParams) -> RenderParams:
    return RenderParams(
        alpha=_lerp_component(raw.alpha, raw0.alpha, raw1.alpha, init.alpha, 0.0, 1.0),
        scale=_lerp_component(raw.scale, raw0.scale, raw1.scale, init.scale, 1e-6, None),
        shadow=_lerp_component(raw.shadow, raw0.shadow, raw1.shadow, init.shadow, 0.0, 1.0),
        offset_m=(
            _lerp_component(raw.offset_m[0], raw0.offset_m[0], raw1.offset_m[0], init.offset_m[0]),
            _lerp_component(raw.offset_m[1], raw0.offset_m[1], raw1.offset_m[1], init.offset_m[1]),
        ),
    )


def _evaluate_active(a: ActiveTransition, now_s: float) -> LayerRenderState:
    return _evaluate_active_local(a, now_s - a.start_time_s)


def _evaluate_active_local(a: ActiveTransition, t: float) -> LayerRenderState:
    t = min(max(t, 0.0), a.spec.total_s)
    raw = evaluate_transition(a.spec, t)
    raw0 = evaluate_transition(a.spec, 0.0)
    raw1 = evaluate_transition(a.spec, a.spec.total_s)
    return LayerRenderState(
        front=_remap_params(raw.front, raw0.front, raw1.front, a.initial.front),
        back=_remap_params(raw.back, raw0.back, raw1.back, a.initial.back),
    )


class Engine:
    """Single-threaded deterministic engine over one experience profile."""

    def __init__(self, profile: ExperienceProfile, asset_root: str | Path = ".",
                 eye: Viewpoint | None = None,
                 calibration: cal.SimilarityTransform | None = None):
        self.asset_root = Path(asset_root)
        self.profile = profile
        self.assets = load_asset_frames(profile, self.asset_root)
        self.geometry = profile.geometry
        self.eye = eye or Viewpoint()
        self.calibration = calibration
        self.optical = OpticalModel()
        self.tick = 0
        self.base_params = _initial_params(profile)
        self.active: list[ActiveTransition] = []
        self.zones: dict[str, Zone | None] = {"user": None}
        self.distance_m: float | None = None
        self._binding_prev = [False] * len(profile.bindings)
        self._depth_masks: tuple[BinaryMask, BinaryMask] | None = None
        self.command_log: list[tuple[int, Command, str]] = []
        self.sensor_log: list[tuple[int, SensorSample]] = []

    # -- time ---------------------------------------------------------------
    @property
    def time_s(self) -> float:
        return self.tick * DT

    # -- parameter evaluation -------------------------------------------------
    def current_params(self, entity: str) -> LayerRenderState:
        state = self.base_params[entity]
        for a in self.active:
            if a.target == entity:
                state = _evaluate_active(a, self.time_s)
        return state

    # -- commands -------------------------------------------------------------
    def handle_command(self, cmd: Command, origin: str = "operator") -> tuple[bool, object]:
        """Apply one command; returns (ok, data-or-error). State is untouched
        on errors, and accepted commands are appended to the log."""
        try:
            data = self._apply(cmd)
        except DomainError as exc:
            return False, str(exc)
        except ParseError as exc:
            return False, f"parse error at {exc.line}:{exc.column}: {exc.message}"
        self.command_log.append((self.tick, cmd, origin))
        return True, data

    def _apply(self, cmd: Command) -> object:
        if isinstance(cmd, Trigger):
            cue = self.profile.cues.get(cmd.cue)
            if cue is None:
                raise DomainError(f"unknown cue '{cmd.cue}'")
            now = self.time_s
            initial = self.current_params(cue.target)
            self.active = [a for a in self.active if a.target != cue.target]
            self.active.append(ActiveTransition(
                cue=cmd.cue, target=cue.target, spec=cue.spec,
                start_time_s=now, initial=initial))
            return {"cue": cmd.cue, "start_time_s": now}
        if isinstance(cmd, SetEye):
            try:
                self.eye = Viewpoint(*cmd.eye)
            except DomainError:
                raise DomainError("eye z must be > 0")
            return {"eye": list(cmd.eye)}
        if isinstance(cmd, SetSeparation):
            if cmd.separation_m <= 0:
                raise DomainError("separation must be > 0")
            self.geometry = replace(self.geometry, separation_m=cmd.separation_m)
            return {"separation_m": cmd.separation_m}
        if isinstance(cmd, SetParam):
            return self._set_param(cmd.path, cmd.value)
        if isinstance(cmd, LoadProfile):
            new_profile = parse_profile(cmd.text)
            new_assets = load_asset_frames(new_profile, self.asset_root)
            self.profile = new_profile
            self.assets = new_assets
            self.geometry = new_profile.geometry
            self.base_params = _initial_params(new_profile)
            self.active = []
            self.zones = {"user": None}
            self.distance_m = None
            self._binding_prev = [False] * len(new_profile.bindings)
            self._depth_masks = None
            return {"entities": list(new_profile.entities)}
        if isinstance(cmd, Step):
            for _ in range(cmd.n):
                self.step([])
            return {"tick": self.tick}
        if isinstance(cmd, Query):
            return self.snapshot(cmd.topic)
        raise DomainError(f"unknown command {cmd!r}")

    def _set_param(self, path: str, value: float) -> object:
        parts = path.split(".")
        if parts[0] == "zones" and len(parts) == 2 and parts[1] in ("personal_max_m", "social_max_m"):
            updated = replace(self.profile.zone_config, **{parts[1]: value})
            self.profile = replace_zone_config(self.profile, updated)
            return {"path": path, "value": value}
        if parts[0] == "entities" and len(parts) == 3:
            name, field = parts[1], parts[2]
            decl = self.profile.entities.get(name)
            if decl is None:
                raise DomainError(f"unknown entity '{name}'")
            if field == "alpha":
                if not (0.0 <= value <= 1.0):
                    raise DomainError("alpha must be in [0, 1]")
                self.profile.entities[name] = replace(decl, alpha=value)
            elif field == "scale":
                if value <= 0:
                    raise DomainError("scale must be > 0")
                self.profile.entities[name] = replace(decl, scale=value)
            else:
                raise DomainError(f"unknown entity parameter '{field}'")
            return {"path": path, "value": value}
        raise DomainError(f"unknown parameter path '{path}'")

    # -- stepping -------------------------------------------------------------
    def step(self, samples: list[SensorSample]) -> None:
        """Advance one tick: ingest samples, fire binding edges, retire
        finished transitions with their end state latched."""
        for s in samples:
            self.sensor_log.append((self.tick, s))
            try:
                self._ingest(s)
            except DomainError as exc:
                logger.warning("tick %d: dropped sensor sample: %s", self.tick, exc)

        zone = None
        if self.distance_m is not None:
            zone = classify_proximity(self.distance_m, self.profile.zone_config)
        self.zones["user"] = zone

        for i, binding in enumerate(self.profile.bindings):
            held = self._condition_holds(binding, zone)
            fire = (held and not self._binding_prev[i]
                    if binding.kind is not ConditionKind.ZONE_EXIT
                    else (not held and self._binding_prev[i]))
            self._binding_prev[i] = held
            if fire:
                ok, err = self.handle_command(Trigger(binding.fire), origin="binding")
                if not ok:
                    logger.warning("tick %d: binding fire failed: %s", self.tick, err)

        self.tick += 1
        now = self.time_s
        still_active: list[ActiveTransition] = []
        for a in self.active:
            if now - a.start_time_s >= a.spec.total_s:
                self.base_params[a.target] = _evaluate_active_local(a, a.spec.total_s)
            else:
                still_active.append(a)
        self.active = still_active

    def _condition_holds(self, binding: BindingDecl, zone: Zone | None) -> bool:
        if binding.kind is ConditionKind.MANUAL:
            return False
        if binding.kind in (ConditionKind.ZONE_ENTER, ConditionKind.ZONE_EXIT):
            return zone is binding.zone
        if binding.kind is ConditionKind.DEPTH_BELOW:
            return self.distance_m is not None and self.distance_m < binding.threshold_m
        return False

    def _ingest(self, s: SensorSample) -> None:
        if isinstance(s, UserDistance):
            self.distance_m = s.distance_m
        elif isinstance(s, HandFrame):
            _, distance = ingest_hand(s, self.calibration, self.geometry)
            self.distance_m = distance
        elif isinstance(s, DepthFrame):
            route = self.profile.depth_route
            if route is None:
                raise DomainError("depth frame received but profile has no depth_route")
            rgb = self._asset_frame(route.source_asset)
            front, back = depth_segment(s, rgb, route.threshold_m)
            self._depth_masks = (front, back)
        else:
            raise DomainError(f"unknown sensor sample {s!r}")

    # -- rendering ------------------------------------------------------------
    def _asset_frame(self, asset: str) -> PixelBuffer:
        frames = self.assets[asset]
        return frames[self.tick % len(frames)]

    def _entity_frame(self, name: str) -> PixelBuffer:
        route = self.profile.depth_route
        if route is not None and name in (route.front_entity, route.back_entity):
            rgb = self._asset_frame(route.source_asset)
            if self._depth_masks is None:
                # Nothing observed yet; route hosts stay dark.
                return PixelBuffer.blank(rgb.width_px, rgb.height_px)
            mask = self._depth_masks[0] if name == route.front_entity else self._depth_masks[1]
            data = rgb.data.copy()
            data[..., 3] *= mask.bits
            return PixelBuffer(data, _validate=False)
        decl = self.profile.entities[name]
        return self._asset_frame(decl.asset)

    def scene(self) -> list[SceneEntity]:
        out: list[SceneEntity] = []
        for name, decl in self.profile.entities.items():
            out.append(SceneEntity(
                name=name,
                frame=self._entity_frame(name),
                center_m=decl.center_m,
                nominal_size_m=self.profile.assets[decl.asset].nominal_size_m,
                base_scale=decl.scale,
                base_alpha=decl.alpha,
                state=self.current_params(name),
                linking_style=decl.linking_style,
                linking=decl.linking,
            ))
        return out

    def render(self) -> tuple[PixelBuffer, PixelBuffer, CompositeFrame]:
        front, back = render_layers(self.scene(), self.geometry)
        frame = composite(front, back, self.geometry, self.eye, self.optical, tick=self.tick)
        return front, back, frame

    # -- snapshots ------------------------------------------------------------
    def snapshot(self, topic: str = "all") -> dict:
        def entity_states() -> dict:
            out = {}
            for name in self.profile.entities:
                st = self.current_params(name)
                out[name] = {
                    "front": _params_dict(st.front),
                    "back": _params_dict(st.back),
                }
            return out

        if topic == "entities":
            return {"entities": entity_states()}
        if topic == "zones":
            return {"zones": {k: (z.value if z else None) for k, z in self.zones.items()},
                    "distance_m": self.distance_m}
        if topic == "active":
            return {"active": [{"cue": a.cue, "target": a.target,
                                "start_time_s": a.start_time_s} for a in self.active]}
        if topic == "tick":
            return {"tick": self.tick, "time_s": self.time_s}
        if topic == "all":
            return {
                "tick": self.tick,
                "time_s": self.time_s,
                "separation_m": self.geometry.separation_m,
                "eye": [self.eye.x, self.eye.y, self.eye.z],
                "cues": sorted(self.profile.cues),
                "entities": entity_states(),
                "zones": {k: (z.value if z else None) for k, z in self.zones.items()},
                "distance_m": self.distance_m,
                "active": [{"cue": a.cue, "target": a.target,
                            "start_time_s": a.start_time_s} for a in self.active],
            }
        raise DomainError(f"unknown query topic '{topic}'")


def _params_dict(p: RenderParams) -> dict:
    return {"alpha": p.alpha, "scale": p.scale, "shadow": p.shadow,
            "offset_m": list(p.offset_m)}


def replace_zone_config(profile: ExperienceProfile, zc: ZoneConfig) -> ExperienceProfile:
    return ExperienceProfile(
        geometry=profile.geometry,
        zone_config=zc,
        assets=profile.assets,
        entities=profile.entities,
        cues=profile.cues,
        bindings=profile.bindings,
        depth_route=profile.depth_route,
    )


# ---------------------------------------------------------------------------
# Sensor replay files: one sample per line, `tick kind payload...`

def parse_sensor_line(line: str) -> tuple[int, SensorSample] | None:
    """Parse one replay line; returns None for blanks and comments."""
    body = line.split("#", 1)[0].strip()
    if not body:
        return None
    fields = body.split()
    if len(fields) < 2:
        raise DomainError(f"sensor line needs `tick kind ...`: {line!r}")
    try:
        tick = int(fields[0])
    except ValueError:
        raise DomainError(f"bad tick in sensor line: {fields[0]!r}") from None
    kind = fields[1]
    payload = fields[2:]
    if kind == "user_distance":
        if len(payload) != 1:
            raise DomainError("user_distance takes one value")
        return tick, UserDistance(float(payload[0]))
    if kind == "hand_frame":
        expected = 2 * HAND_JOINTS * 3
        if len(payload) != expected:
            raise DomainError(f"hand_frame takes {expected} values, got {len(payload)}")
        arr = np.array([float(v) for v in payload]).reshape(2, HAND_JOINTS, 3)
        return tick, HandFrame(arr)
    if kind == "depth_frame":
        if len(payload) < 2:
            raise DomainError("depth_frame takes `w h` then w*h values")
        w, h = int(payload[0]), int(payload[1])
        values = payload[2:]
        if len(values) != w * h:
            raise DomainError(f"depth_frame expects {w * h} depths, got {len(values)}")
        arr = np.array([float(v) for v in values]).reshape(h, w)
        return tick, DepthFrame(arr)
    raise DomainError(f"unknown sensor kind {kind!r}")


def read_sensor_file(path: str | Path) -> list[tuple[int, SensorSample]]:
    out: list[tuple[int, SensorSample]] = []
    for lineno, line in enumerate(read_text_file(path).splitlines(), start=1):
        try:
            parsed = parse_sensor_line(line)
        except DomainError as exc:
            raise DomainError(f"{path}:{lineno}: {exc}") from None
        if parsed is not None:
            out.append(parsed)
    out.sort(key=lambda pair: pair[0])
    return out
