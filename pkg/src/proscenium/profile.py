"""Experience-profile DSL: parser, canonical serializer, and lints.

A profile declares the display pair, assets, entities, cues (transitions),
sensor bindings, and optional depth routing, in a block-structured text
format:

    display { separation_m 0.72; }
    asset hand { kind image; path "assets/hand.pam"; nominal_size_m 0.3 0.4; }
    entity h1 { asset hand; layer back; }
    cue raise { target h1; transition { direction back_to_front; duration_s 1.0; } }
    binding { on manual; fire raise; }

Statements are `key value... ;`, `#` starts a line comment, and sub-blocks
nest with braces. Parsing stops at the first error and reports an exact
1-based line and column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .core import Color, DisplayGeometry, DomainError, LayerId
from .linking import LinkingParams, LinkingStyle
from .transition import (
    Direction,
    DirectionKind,
    EasingStyle,
    Envelope,
    PhaseSpec,
    TransitionSpec,
    fade_in,
    fade_out,
    make_transition,
    ramp,
)


class Zone(Enum):
    PERSONAL = "personal"
    SOCIAL = "social"
    PUBLIC = "public"


@dataclass(frozen=True)
class ZoneConfig:
    personal_max_m: float = 1.2
    social_max_m: float = 3.6

    def __post_init__(self) -> None:
        if not (0.0 < self.personal_max_m < self.social_max_m):
            raise DomainError("zone thresholds must satisfy 0 < personal < social")


class AssetKind(Enum):
    IMAGE = "image"
    FRAME_SEQUENCE = "frame_sequence"


@dataclass(frozen=True)
class AssetDecl:
    name: str
    kind: AssetKind
    paths: tuple[str, ...]
    nominal_size_m: tuple[float, float]


@dataclass(frozen=True)
class EntityDecl:
    name: str
    asset: str
    layer: LayerId
    center_m: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    alpha: float = 1.0
    linking_style: LinkingStyle = LinkingStyle.NONE
    linking: LinkingParams = LinkingParams()


@dataclass(frozen=True)
class CueDecl:
    name: str
    target: str
    spec: TransitionSpec


class ConditionKind(Enum):
    ZONE_ENTER = "zone_enter"
    ZONE_EXIT = "zone_exit"
    DEPTH_BELOW = "depth_below"
    MANUAL = "manual"


@dataclass(frozen=True)
class BindingDecl:
    kind: ConditionKind
    fire: str
    zone: Zone | None = None
    threshold_m: float | None = None


@dataclass(frozen=True)
class DepthRoute:
    """Routes a depth-segmented asset's pixels onto two host entities."""

    source_asset: str
    front_entity: str
    back_entity: str
    threshold_m: float


@dataclass(frozen=True)
class ExperienceProfile:
    geometry: DisplayGeometry
    zone_config: ZoneConfig = ZoneConfig()
    assets: dict[str, AssetDecl] = field(default_factory=dict)
    entities: dict[str, EntityDecl] = field(default_factory=dict)
    cues: dict[str, CueDecl] = field(default_factory=dict)
    bindings: tuple[BindingDecl, ...] = ()
    depth_route: DepthRoute | None = None

    def entity_order(self) -> list[str]:
        return list(self.entities)


class ParseError(Exception):
    """First parse failure, with a 1-based position inside the input."""

    def __init__(self, line: int, column: int, message: str, snippet: str = ""):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet


# ---------------------------------------------------------------------------
# Tokenizer

@dataclass(frozen=True)
class _Token:
    kind: str  # ident | number | string | { | } | ; | eof
    text: str
    line: int
    column: int
    value: object = None


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _tokenize(text: str, lines: list[str]) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        if c in "{};":
            tokens.append(_Token(c, c, line, col))
            i += 1
            col += 1
            continue
        if c == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out: list[str] = []
            while True:
                if i >= n or text[i] == "\n":
                    raise ParseError(start_line, start_col, "unterminated string",
                                     _line_of(lines, start_line))
                ch = text[i]
                if ch == "\\":
                    if i + 1 >= n:
                        raise ParseError(line, col, "unterminated escape", _line_of(lines, line))
                    esc = text[i + 1]
                    if esc not in ('"', "\\"):
                        raise ParseError(line, col, f"unknown escape \\{esc}", _line_of(lines, line))
                    out.append(esc)
                    i += 2
                    col += 2
                    continue
                if ch == '"':
                    i += 1
                    col += 1
                    break
                out.append(ch)
                i += 1
                col += 1
            tokens.append(_Token("string", "".join(out), start_line, start_col, "".join(out)))
            continue
        m = _NUMBER_RE.match(text, i)
        ident_m = _IDENT_RE.match(text, i)
        # Idents win over numbers only when the number match is empty.
        if m and (not ident_m or m.end() > i):
            lexeme = m.group(0)
            tokens.append(_Token("number", lexeme, line, col, float(lexeme)))
            i = m.end()
            col += len(lexeme)
            continue
        if ident_m:
            lexeme = ident_m.group(0)
            tokens.append(_Token("ident", lexeme, line, col, lexeme))
            i = ident_m.end()
            col += len(lexeme)
            continue
        raise ParseError(line, col, f"unexpected character {c!r}", _line_of(lines, line))
    tokens.append(_Token("eof", "", line, col))
    return tokens


def _line_of(lines: list[str], lineno: int) -> str:
    if 1 <= lineno <= len(lines):
        return lines[lineno - 1]
    return ""


# ---------------------------------------------------------------------------
# Parser

_TRANSITION_DIRECTIONS = {
    "front_to_back": Direction(DirectionKind.FRONT_TO_BACK),
    "back_to_front": Direction(DirectionKind.BACK_TO_FRONT),
    "fade_in_front": fade_in(LayerId.FRONT),
    "fade_in_back": fade_in(LayerId.BACK),
    "fade_out_front": fade_out(LayerId.FRONT),
    "fade_out_back": fade_out(LayerId.BACK),
}

_STYLE_NAMES = {s.value: s for s in EasingStyle}
_LINK_STYLES = {s.value: s for s in LinkingStyle}


class _Parser:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.tokens = _tokenize(text, self.lines)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------
    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, tok: _Token, message: str):
        raise ParseError(tok.line, tok.column, message, _line_of(self.lines, tok.line))

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            self.fail(tok, f"expected {what}, got {tok.text!r}" if tok.kind != "eof"
                      else f"expected {what}, got end of input")
        return tok

    # -- statement / block plumbing ----------------------------------------
    def read_statement(self, key_tok: _Token) -> list[_Token]:
        values: list[_Token] = []
        while True:
            tok = self.next()
            if tok.kind == ";":
                return values
            if tok.kind in ("ident", "number", "string"):
                values.append(tok)
            elif tok.kind == "eof":
                self.fail(tok, f"unterminated statement for key '{key_tok.text}'")
            else:
                self.fail(tok, f"unexpected {tok.text!r} in statement for key '{key_tok.text}'")

    def parse_body(self, allowed_blocks: dict[str, object], on_statement) -> None:
        """Parse `{ ... }`; sub-block names in allowed_blocks dispatch there."""
        self.expect("{", "'{'")
        while True:
            tok = self.next()
            if tok.kind == "}":
                return
            if tok.kind == "eof":
                self.fail(tok, "unexpected end of input inside block")
            if tok.kind != "ident":
                self.fail(tok, f"expected a key or '}}', got {tok.text!r}")
            if tok.text in allowed_blocks and self.peek().kind == "{":
                allowed_blocks[tok.text](tok)
            else:
                values = self.read_statement(tok)
                on_statement(tok, values)

    # -- typed value readers -------------------------------------------------
    def one_number(self, key: _Token, values: list[_Token]) -> tuple[float, _Token]:
        if len(values) != 1 or values[0].kind != "number":
            self.fail(values[0] if values else key, f"key '{key.text}' takes one number")
        return float(values[0].value), values[0]

    def positive_number(self, key, values) -> float:
        v, tok = self.one_number(key, values)
        if not (v > 0):
            self.fail(tok, f"key '{key.text}' must be > 0")
        return v

    def nonneg_number(self, key, values) -> float:
        v, tok = self.one_number(key, values)
        if v < 0:
            self.fail(tok, f"key '{key.text}' must be >= 0")
        return v

    def unit_number(self, key, values) -> float:
        v, tok = self.one_number(key, values)
        if not (0.0 <= v <= 1.0):
            self.fail(tok, f"key '{key.text}' must be in [0, 1]")
        return v

    def positive_int(self, key, values) -> int:
        v, tok = self.one_number(key, values)
        if v != int(v) or v <= 0:
            self.fail(tok, f"key '{key.text}' must be a positive integer")
        return int(v)

    def nonneg_int(self, key, values) -> int:
        v, tok = self.one_number(key, values)
        if v != int(v) or v < 0:
            self.fail(tok, f"key '{key.text}' must be a non-negative integer")
        return int(v)

    def pair(self, key, values) -> tuple[float, float]:
        if len(values) != 2 or any(v.kind != "number" for v in values):
            self.fail(values[0] if values else key, f"key '{key.text}' takes two numbers")
        return (float(values[0].value), float(values[1].value))

    def one_ident(self, key, values, choices: dict[str, object] | None = None):
        if len(values) != 1 or values[0].kind != "ident":
            self.fail(values[0] if values else key, f"key '{key.text}' takes one identifier")
        name = values[0].text
        if choices is not None and name not in choices:
            self.fail(values[0], f"key '{key.text}': expected one of {sorted(choices)}, got '{name}'")
        return (choices[name] if choices is not None else name), values[0]

    def one_string(self, key, values) -> str:
        if len(values) != 1 or values[0].kind != "string":
            self.fail(values[0] if values else key, f"key '{key.text}' takes one string")
        return str(values[0].value)

    def no_dup(self, store: dict, key: _Token):
        if key.text in store:
            self.fail(key, f"duplicate key '{key.text}' in block")

    # -- top level ---------------------------------------------------------
    def parse_profile(self) -> ExperienceProfile:
        geometry: DisplayGeometry | None = None
        zone_config = ZoneConfig()
        assets: dict[str, AssetDecl] = {}
        entities: dict[str, EntityDecl] = {}
        cues: dict[str, CueDecl] = {}
        bindings: list[BindingDecl] = []
        depth_route: DepthRoute | None = None
        # Positions of reference-bearing statements for late resolution.
        ref_sites: list[tuple[str, str, str, _Token]] = []
        entity_sites: dict[str, _Token] = {}

        while True:
            tok = self.next()
            if tok.kind == "eof":
                break
            if tok.kind != "ident":
                self.fail(tok, f"expected a block name, got {tok.text!r}")
            name = tok.text
            if name == "display":
                if geometry is not None:
                    self.fail(tok, "duplicate display block")
                geometry = self.parse_display(tok)
            elif name == "zones":
                zone_config = self.parse_zones(tok)
            elif name == "asset":
                decl = self.parse_asset(tok)
                if decl.name in assets:
                    self.fail(self._last_name_tok, f"duplicate asset '{decl.name}'")
                assets[decl.name] = decl
            elif name == "entity":
                decl, site, asset_tok = self.parse_entity(tok)
                if decl.name in entities:
                    self.fail(site, f"duplicate entity '{decl.name}'")
                entities[decl.name] = decl
                entity_sites[decl.name] = site
                ref_sites.append(("asset", decl.asset, f"entity '{decl.name}'", asset_tok))
            elif name == "cue":
                decl, site, target_tok = self.parse_cue(tok)
                if decl.name in cues:
                    self.fail(site, f"duplicate cue '{decl.name}'")
                cues[decl.name] = decl
                ref_sites.append(("entity", decl.target, f"cue '{decl.name}'", target_tok))
            elif name == "binding":
                decl, fire_tok = self.parse_binding(tok)
                bindings.append(decl)
                ref_sites.append(("cue", decl.fire, "binding", fire_tok))
            elif name == "depth_route":
                if depth_route is not None:
                    self.fail(tok, "duplicate depth_route block")
                depth_route, route_toks = self.parse_depth_route(tok)
                ref_sites.append(("asset", depth_route.source_asset, "depth_route", route_toks[0]))
                ref_sites.append(("entity", depth_route.front_entity, "depth_route", route_toks[1]))
                ref_sites.append(("entity", depth_route.back_entity, "depth_route", route_toks[2]))
            else:
                self.fail(tok, f"unknown block '{name}'")

        if geometry is None:
            raise ParseError(1, 1, "missing display block", _line_of(self.lines, 1))

        namespaces = {"asset": assets, "entity": entities, "cue": cues}
        for kind, ref, owner, site in ref_sites:
            if ref not in namespaces[kind]:
                self.fail(site, f"{owner} references unknown {kind} '{ref}'")

        # Pose sanity: within panel bounds plus one panel width on each side.
        for decl in entities.values():
            limit_x = 1.5 * geometry.physical_width_m
            limit_y = 1.5 * geometry.physical_height_m
            cx, cy = decl.center_m
            if abs(cx) > limit_x or abs(cy) > limit_y:
                self.fail(entity_sites[decl.name],
                          f"entity '{decl.name}' center {decl.center_m} is implausibly far off-panel")

        return ExperienceProfile(
            geometry=geometry,
            zone_config=zone_config,
            assets=assets,
            entities=entities,
            cues=cues,
            bindings=tuple(bindings),
            depth_route=depth_route,
        )

    # -- blocks --------------------------------------------------------------
    def parse_display(self, header: _Token) -> DisplayGeometry:
        got: dict[str, object] = {}

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text in ("width_px", "height_px"):
                got[key.text] = self.positive_int(key, values)
            elif key.text in ("physical_width_m", "physical_height_m", "separation_m"):
                got[key.text] = self.positive_number(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in display block")

        self.parse_body({}, on_stmt)
        try:
            return DisplayGeometry(**got)  # type: ignore[arg-type]
        except DomainError as exc:
            self.fail(header, f"invalid display geometry: {exc}")

    def parse_zones(self, header: _Token) -> ZoneConfig:
        got: dict[str, float] = {}

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text in ("personal_max_m", "social_max_m"):
                got[key.text] = self.positive_number(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in zones block")

        self.parse_body({}, on_stmt)
        try:
            return ZoneConfig(**got)
        except DomainError as exc:
            self.fail(header, f"invalid zones: {exc}")

    def parse_asset(self, header: _Token) -> AssetDecl:
        name_tok = self.expect("ident", "asset name")
        self._last_name_tok = name_tok
        got: dict[str, object] = {}

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "kind":
                got["kind"], _ = self.one_ident(key, values, {k.value: k for k in AssetKind})
            elif key.text == "path":
                got["path"] = self.one_string(key, values)
            elif key.text == "frames":
                if not values or any(v.kind != "string" for v in values):
                    self.fail(values[0] if values else key, "key 'frames' takes one or more strings")
                got["frames"] = tuple(str(v.value) for v in values)
            elif key.text == "nominal_size_m":
                w, h = self.pair(key, values)
                if w <= 0 or h <= 0:
                    self.fail(values[0], "nominal_size_m must be positive")
                got["nominal_size_m"] = (w, h)
            else:
                self.fail(key, f"unknown key '{key.text}' in asset block")

        self.parse_body({}, on_stmt)
        if "path" in got and "frames" in got:
            self.fail(name_tok, f"asset '{name_tok.text}' declares both path and frames")
        if "path" in got:
            paths: tuple[str, ...] = (got["path"],)
            kind = got.get("kind", AssetKind.IMAGE)
        elif "frames" in got:
            paths = got["frames"]
            kind = got.get("kind", AssetKind.FRAME_SEQUENCE)
        else:
            self.fail(name_tok, f"asset '{name_tok.text}' needs a path or frames")
        if kind is AssetKind.IMAGE and len(paths) != 1:
            self.fail(name_tok, "image assets take exactly one path")
        if "nominal_size_m" not in got:
            self.fail(name_tok, f"asset '{name_tok.text}' needs nominal_size_m")
        return AssetDecl(name=name_tok.text, kind=kind, paths=paths,
                         nominal_size_m=got["nominal_size_m"])

    def parse_link(self, defaults: LinkingParams) -> tuple[LinkingStyle, LinkingParams, _Token | None]:
        got: dict[str, object] = {}
        style: list = [LinkingStyle.NONE, None]

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "style":
                style[0], style[1] = self.one_ident(key, values, _LINK_STYLES)
                got["style"] = style[0]
            elif key.text == "halo_radius_px":
                got["halo_radius_px"] = self.positive_int(key, values)
            elif key.text == "halo_blur_px":
                got["halo_blur_px"] = self.nonneg_int(key, values)
            elif key.text == "outline_thickness_px":
                got["outline_thickness_px"] = self.positive_int(key, values)
            elif key.text == "clone_alpha":
                got["clone_alpha"] = self.unit_number(key, values)
            elif key.text == "landmark_size_px":
                got["landmark_size_px"] = self.positive_int(key, values)
            elif key.text == "tint":
                if len(values) != 3 or any(v.kind != "number" for v in values):
                    self.fail(values[0] if values else key, "key 'tint' takes three numbers")
                rgb = [float(v.value) for v in values]
                if any(not (0.0 <= c <= 1.0) for c in rgb):
                    self.fail(values[0], "tint channels must be in [0, 1]")
                got["tint"] = Color(*rgb)
            else:
                self.fail(key, f"unknown key '{key.text}' in link block")

        self.parse_body({}, on_stmt)
        fields = {k: v for k, v in got.items() if k != "style"}
        return style[0], replace(defaults, **fields), style[1]

    def parse_entity(self, header: _Token) -> tuple[EntityDecl, _Token, _Token]:
        name_tok = self.expect("ident", "entity name")
        got: dict[str, object] = {}
        link_state: list = [LinkingStyle.NONE, LinkingParams()]
        asset_tok: list[_Token | None] = [None]

        def on_link(tok):
            if "link" in got:
                self.fail(tok, "duplicate link block")
            got["link"] = True
            link_state[0], link_state[1], _ = self.parse_link(LinkingParams())

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "asset":
                got["asset"], asset_tok[0] = self.one_ident(key, values)
            elif key.text == "layer":
                got["layer"], _ = self.one_ident(
                    key, values, {"front": LayerId.FRONT, "back": LayerId.BACK})
            elif key.text == "center_m":
                got["center_m"] = self.pair(key, values)
            elif key.text == "scale":
                got["scale"] = self.positive_number(key, values)
            elif key.text == "alpha":
                got["alpha"] = self.unit_number(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in entity block")

        self.parse_body({"link": on_link}, on_stmt)
        if "asset" not in got:
            self.fail(name_tok, f"entity '{name_tok.text}' needs an asset")
        if "layer" not in got:
            self.fail(name_tok, f"entity '{name_tok.text}' needs a layer")
        decl = EntityDecl(
            name=name_tok.text,
            asset=got["asset"],
            layer=got["layer"],
            center_m=got.get("center_m", (0.0, 0.0)),
            scale=got.get("scale", 1.0),
            alpha=got.get("alpha", 1.0),
            linking_style=link_state[0],
            linking=link_state[1],
        )
        return decl, name_tok, asset_tok[0]

    def parse_envelope(self, header: _Token, fallback_duration: float | None) -> Envelope:
        got: dict[str, object] = {}
        phases: list[PhaseSpec] = []

        def on_phase(tok):
            phase_got: dict[str, object] = {}

            def on_stmt(key, values):
                self.no_dup(phase_got, key)
                if key.text == "fraction":
                    phase_got["fraction"] = self.positive_number(key, values)
                elif key.text == "style":
                    phase_got["style"], _ = self.one_ident(key, values, _STYLE_NAMES)
                elif key.text == "from":
                    phase_got["from"], _ = self.one_number(key, values)
                elif key.text == "to":
                    phase_got["to"], _ = self.one_number(key, values)
                else:
                    self.fail(key, f"unknown key '{key.text}' in phase block")

            self.parse_body({}, on_stmt)
            for needed in ("fraction", "from", "to"):
                if needed not in phase_got:
                    self.fail(tok, f"phase needs '{needed}'")
            phases.append(PhaseSpec(
                fraction=phase_got["fraction"],
                style=phase_got.get("style", EasingStyle.LINEAR),
                start_value=phase_got["from"],
                end_value=phase_got["to"],
            ))

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "duration_s":
                got["duration_s"] = self.positive_number(key, values)
            elif key.text == "delay_s":
                got["delay_s"] = self.nonneg_number(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in envelope block")

        self.parse_body({"phase": on_phase}, on_stmt)
        if len(phases) != 3:
            self.fail(header, f"envelope needs exactly 3 phases, got {len(phases)}")
        duration = got.get("duration_s", fallback_duration)
        if duration is None:
            self.fail(header, "envelope needs duration_s")
        try:
            return Envelope(phases=tuple(phases), duration_s=duration,
                            delay_s=got.get("delay_s", 0.0))
        except DomainError as exc:
            self.fail(header, f"invalid envelope: {exc}")

    def parse_transition(self, header: _Token) -> TransitionSpec:
        got: dict[str, object] = {}
        envelopes: dict[str, tuple[_Token, object]] = {}

        def on_envelope(tok):
            if tok.text in envelopes:
                self.fail(tok, f"duplicate {tok.text} block")
            # Envelope duration defaults to the transition duration, which
            # must therefore appear before an explicit envelope block.
            envelopes[tok.text] = (tok, self.parse_envelope(tok, got.get("duration_s")))

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "direction":
                got["direction"], _ = self.one_ident(key, values, _TRANSITION_DIRECTIONS)
            elif key.text == "duration_s":
                got["duration_s"] = self.positive_number(key, values)
            elif key.text == "lag_s":
                got["lag_s"] = self.nonneg_number(key, values)
            elif key.text == "separation_m":
                got["separation_m"] = self.positive_number(key, values)
            elif key.text == "style":
                got["style"], _ = self.one_ident(key, values, _STYLE_NAMES)
            elif key.text == "parameters":
                if not values or any(v.kind != "ident" for v in values):
                    self.fail(values[0] if values else key, "key 'parameters' takes identifiers")
                names = [v.text for v in values]
                for v in values:
                    if v.text not in ("alpha", "scale", "shadow", "offset"):
                        self.fail(v, f"unknown transition parameter '{v.text}'")
                got["parameters"] = frozenset(names)
            else:
                self.fail(key, f"unknown key '{key.text}' in transition block")

        self.parse_body({"source_envelope": on_envelope, "dest_envelope": on_envelope}, on_stmt)
        if "direction" not in got:
            self.fail(header, "transition needs a direction")
        if "duration_s" not in got:
            self.fail(header, "transition needs duration_s")
        direction: Direction = got["direction"]
        style = got.get("style")
        duration = got["duration_s"]
        parameters = got.get("parameters", frozenset({"alpha"}))
        src = envelopes.get("source_envelope", (None, None))[1]
        dst = envelopes.get("dest_envelope", (None, None))[1]
        try:
            if direction.is_fade:
                if dst is not None:
                    self.fail(envelopes["dest_envelope"][0], "fade transitions use a single envelope")
                if src is None:
                    lo, hi = (0.0, 1.0) if direction.kind is DirectionKind.FADE_IN else (1.0, 0.0)
                    src = ramp(lo, hi, duration, style)
                return TransitionSpec(
                    direction=direction,
                    duration_s=duration,
                    lag_s=got.get("lag_s", 0.0),
                    parameters=parameters,
                    source_envelope=src,
                    separation_m=got.get("separation_m"),
                )
            return make_transition(
                direction=direction,
                duration_s=duration,
                lag_s=got.get("lag_s", 0.0),
                parameters=parameters,
                style=style,
                source_envelope=src,
                dest_envelope=dst,
                separation_m=got.get("separation_m"),
            )
        except DomainError as exc:
            self.fail(header, f"invalid transition: {exc}")

    def parse_cue(self, header: _Token) -> tuple[CueDecl, _Token, _Token]:
        name_tok = self.expect("ident", "cue name")
        got: dict[str, object] = {}
        target_tok: list[_Token | None] = [None]

        def on_transition(tok):
            if "transition" in got:
                self.fail(tok, "duplicate transition block")
            got["transition"] = self.parse_transition(tok)

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "target":
                got["target"], target_tok[0] = self.one_ident(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in cue block")

        self.parse_body({"transition": on_transition}, on_stmt)
        if "target" not in got:
            self.fail(name_tok, f"cue '{name_tok.text}' needs a target")
        if "transition" not in got:
            self.fail(name_tok, f"cue '{name_tok.text}' needs a transition block")
        return CueDecl(name=name_tok.text, target=got["target"], spec=got["transition"]), name_tok, target_tok[0]

    def parse_binding(self, header: _Token) -> tuple[BindingDecl, _Token]:
        got: dict[str, object] = {}
        fire_tok: list[_Token | None] = [None]

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text == "on":
                if not values:
                    self.fail(key, "key 'on' needs a condition")
                kind_tok = values[0]
                if kind_tok.kind != "ident":
                    self.fail(kind_tok, "condition must start with an identifier")
                kinds = {k.value: k for k in ConditionKind}
                if kind_tok.text not in kinds:
                    self.fail(kind_tok, f"unknown condition '{kind_tok.text}'")
                kind = kinds[kind_tok.text]
                if kind in (ConditionKind.ZONE_ENTER, ConditionKind.ZONE_EXIT):
                    if len(values) != 2 or values[1].kind != "ident":
                        self.fail(kind_tok, f"'{kind.value}' takes a zone name")
                    zones = {z.value: z for z in Zone}
                    if values[1].text not in zones:
                        self.fail(values[1], f"unknown zone '{values[1].text}'")
                    got["on"] = (kind, zones[values[1].text], None)
                elif kind is ConditionKind.DEPTH_BELOW:
                    if len(values) != 2 or values[1].kind != "number":
                        self.fail(kind_tok, "'depth_below' takes a threshold in meters")
                    threshold = float(values[1].value)
                    if threshold <= 0:
                        self.fail(values[1], "depth threshold must be > 0")
                    got["on"] = (kind, None, threshold)
                else:
                    if len(values) != 1:
                        self.fail(values[1], "'manual' takes no arguments")
                    got["on"] = (kind, None, None)
            elif key.text == "fire":
                got["fire"], fire_tok[0] = self.one_ident(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in binding block")

        self.parse_body({}, on_stmt)
        if "on" not in got:
            self.fail(header, "binding needs an 'on' condition")
        if "fire" not in got:
            self.fail(header, "binding needs a 'fire' cue")
        kind, zone, threshold = got["on"]
        return BindingDecl(kind=kind, fire=got["fire"], zone=zone, threshold_m=threshold), fire_tok[0]

    def parse_depth_route(self, header: _Token) -> tuple[DepthRoute, list[_Token]]:
        got: dict[str, object] = {}
        toks: dict[str, _Token] = {}

        def on_stmt(key, values):
            self.no_dup(got, key)
            if key.text in ("source", "front", "back"):
                got[key.text], toks[key.text] = self.one_ident(key, values)
            elif key.text == "threshold_m":
                got["threshold_m"] = self.positive_number(key, values)
            else:
                self.fail(key, f"unknown key '{key.text}' in depth_route block")

        self.parse_body({}, on_stmt)
        for needed in ("source", "front", "back", "threshold_m"):
            if needed not in got:
                self.fail(header, f"depth_route needs '{needed}'")
        route = DepthRoute(
            source_asset=got["source"],
            front_entity=got["front"],
            back_entity=got["back"],
            threshold_m=got["threshold_m"],
        )
        return route, [toks["source"], toks["front"], toks["back"]]


def parse_profile(text: str) -> ExperienceProfile:
    """Parse profile text; raises :class:`ParseError` on the first problem."""
    return _Parser(text).parse_profile()


# ---------------------------------------------------------------------------
# Canonical serializer

def _num(v: float) -> str:
    return repr(float(v))


def _serialize_envelope(name: str, env: Envelope, out: list[str], indent: str) -> None:
    out.append(f"{indent}{name} {{")
    out.append(f"{indent}  duration_s {_num(env.duration_s)};")
    out.append(f"{indent}  delay_s {_num(env.delay_s)};")
    for ph in env.phases:
        out.append(
            f"{indent}  phase {{ fraction {_num(ph.fraction)}; style {ph.style.value}; "
            f"from {_num(ph.start_value)}; to {_num(ph.end_value)}; }}"
        )
    out.append(f"{indent}}}")


def _direction_name(d: Direction) -> str:
    if d.kind is DirectionKind.FRONT_TO_BACK:
        return "front_to_back"
    if d.kind is DirectionKind.BACK_TO_FRONT:
        return "back_to_front"
    side = "front" if d.layer is LayerId.FRONT else "back"
    return f"fade_{'in' if d.kind is DirectionKind.FADE_IN else 'out'}_{side}"


def serialize_profile(p: ExperienceProfile) -> str:
    """Canonical text form: fixed key order, sorted maps, 2-space indent."""
    out: list[str] = []
    g = p.geometry
    out.append("display {")
    out.append(f"  width_px {g.width_px};")
    out.append(f"  height_px {g.height_px};")
    out.append(f"  physical_width_m {_num(g.physical_width_m)};")
    out.append(f"  physical_height_m {_num(g.physical_height_m)};")
    out.append(f"  separation_m {_num(g.separation_m)};")
    out.append("}")

    z = p.zone_config
    out.append("zones {")
    out.append(f"  personal_max_m {_num(z.personal_max_m)};")
    out.append(f"  social_max_m {_num(z.social_max_m)};")
    out.append("}")

    for name in sorted(p.assets):
        a = p.assets[name]
        out.append(f"asset {name} {{")
        out.append(f"  kind {a.kind.value};")
        if a.kind is AssetKind.IMAGE:
            out.append(f'  path "{_escape(a.paths[0])}";')
        else:
            joined = " ".join(f'"{_escape(path)}"' for path in a.paths)
            out.append(f"  frames {joined};")
        w, h = a.nominal_size_m
        out.append(f"  nominal_size_m {_num(w)} {_num(h)};")
        out.append("}")

    for name, e in p.entities.items():
        out.append(f"entity {name} {{")
        out.append(f"  asset {e.asset};")
        out.append(f"  layer {e.layer.value};")
        out.append(f"  center_m {_num(e.center_m[0])} {_num(e.center_m[1])};")
        out.append(f"  scale {_num(e.scale)};")
        out.append(f"  alpha {_num(e.alpha)};")
        if e.linking_style is not LinkingStyle.NONE:
            lp = e.linking
            out.append("  link {")
            out.append(f"    style {e.linking_style.value};")
            out.append(f"    halo_radius_px {lp.halo_radius_px};")
            out.append(f"    halo_blur_px {lp.halo_blur_px};")
            out.append(f"    outline_thickness_px {lp.outline_thickness_px};")
            out.append(f"    clone_alpha {_num(lp.clone_alpha)};")
            out.append(f"    landmark_size_px {lp.landmark_size_px};")
            if lp.tint is not None:
                out.append(f"    tint {_num(lp.tint.r)} {_num(lp.tint.g)} {_num(lp.tint.b)};")
            out.append("  }")
        out.append("}")

    for name in sorted(p.cues):
        c = p.cues[name]
        s = c.spec
        out.append(f"cue {name} {{")
        out.append(f"  target {c.target};")
        out.append("  transition {")
        out.append(f"    direction {_direction_name(s.direction)};")
        out.append(f"    parameters {' '.join(sorted(s.parameters))};")
        out.append(f"    duration_s {_num(s.duration_s)};")
        out.append(f"    lag_s {_num(s.lag_s)};")
        if s.separation_m is not None:
            out.append(f"    separation_m {_num(s.separation_m)};")
        _serialize_envelope("source_envelope", s.source_envelope, out, "    ")
        if s.dest_envelope is not None:
            _serialize_envelope("dest_envelope", s.dest_envelope, out, "    ")
        out.append("  }")
        out.append("}")

    for b in p.bindings:
        out.append("binding {")
        if b.kind in (ConditionKind.ZONE_ENTER, ConditionKind.ZONE_EXIT):
            out.append(f"  on {b.kind.value} {b.zone.value};")
        elif b.kind is ConditionKind.DEPTH_BELOW:
            out.append(f"  on depth_below {_num(b.threshold_m)};")
        else:
            out.append("  on manual;")
        out.append(f"  fire {b.fire};")
        out.append("}")

    if p.depth_route is not None:
        r = p.depth_route
        out.append("depth_route {")
        out.append(f"  source {r.source_asset};")
        out.append(f"  front {r.front_entity};")
        out.append(f"  back {r.back_entity};")
        out.append(f"  threshold_m {_num(r.threshold_m)};")
        out.append("}")

    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


# ---------------------------------------------------------------------------
# Lints

def validate(p: ExperienceProfile) -> list[str]:
    """Non-fatal diagnostics; an empty list means the profile is clean."""
    notes: list[str] = []
    sep = p.geometry.separation_m
    if not (0.05 < sep < 3.0):
        notes.append(f"separation_m {sep} is outside the practical range (0.05, 3.0)")
    hw = p.geometry.physical_width_m / 2.0
    hh = p.geometry.physical_height_m / 2.0
    for name, e in p.entities.items():
        cx, cy = e.center_m
        if abs(cx) > hw or abs(cy) > hh:
            notes.append(f"entity '{name}' center {e.center_m} lies outside the panel")
    used_assets = {e.asset for e in p.entities.values()}
    if p.depth_route is not None:
        used_assets.add(p.depth_route.source_asset)
    for name in sorted(set(p.assets) - used_assets):
        notes.append(f"unused asset: {name}")
    used_cues = {b.fire for b in p.bindings}
    for name in sorted(set(p.cues) - used_cues):
        notes.append(f"unused cue: {name}")
    return notes
