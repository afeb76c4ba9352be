"""Run configuration files.

Line-oriented ``key = value`` pairs under ``[section]`` headers; ``#`` starts
a comment. Numbers are decimals or exact rationals ``p/q``; vectors and
matrices are bracketed lists, e.g. ``[[1/2, 0], [1/2, 1/2]]``. Maps and
condensation primitives are numbered sections::

    [map.1]
    linear = [[1/2, 0], [1/2, 1/2]]
    translation = [0, 0]

    [condensation.1]
    type = circle
    center = [3/4, 3/4]
    radius = 1/5
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .affinity import DEFAULT_PRESSURE_BUDGET
from .ifs import (
    DEFAULT_STOPPING_BUDGET,
    IFS,
    BoundingBall,
    Circle,
    CondensationSet,
    NotContractingError,
    PointCloud,
    Polygon,
    Segment,
    System,
    normalize,
)
from .linalg import AffineMap, InvalidMatrixError

BUNDLED = Path(__file__).parent / "configs"


class ConfigSyntaxError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# values

_TOKEN = re.compile(r"\s*(?:(\[)|(\])|(,)|([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?:/\d+)?))")


def parse_value(text: str):
    """Parse a number or a (nested) bracketed list of numbers into floats."""
    pos = 0
    tokens = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"unexpected text {text[pos:]!r}")
        tokens.append(m.group(1) or m.group(2) or m.group(3) or m.group(4))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if not tokens:
        raise ValueError("empty value")

    def number(tok):
        try:
            return float(Fraction(tok))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad number {tok!r}") from exc

    def parse(i):
        tok = tokens[i]
        if tok == "[":
            items = []
            i += 1
            if tokens[i] == "]":
                return items, i + 1
            while True:
                item, i = parse(i)
                items.append(item)
                if i >= len(tokens):
                    raise ValueError("unterminated list")
                if tokens[i] == "]":
                    return items, i + 1
                if tokens[i] != ",":
                    raise ValueError(f"expected ',' or ']', got {tokens[i]!r}")
                i += 1
        if tok in ("]", ","):
            raise ValueError(f"unexpected {tok!r}")
        return number(tok), i + 1

    try:
        value, end = parse(0)
    except IndexError:
        raise ValueError("unterminated list") from None
    if end != len(tokens):
        raise ValueError("trailing text after value")
    return value


def _fmt(value) -> str:
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return repr(float(value))


# ---------------------------------------------------------------------------
# config model

@dataclass(frozen=True)
class MapSpec:
    linear: tuple[tuple[float, ...], ...]
    translation: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    maps: tuple[MapSpec, ...]
    condensation: tuple = ()
    ball: tuple[tuple[float, ...], float] | None = None
    stopping_budget: int = DEFAULT_STOPPING_BUDGET
    pressure_budget: int = DEFAULT_PRESSURE_BUDGET
    j_range: tuple[int, int] = (4, 11)
    window: tuple[int, int] | None = None
    refine: int = 1
    k_max: int = 12
    tolerance: float = 0.1
    kappa_floor: float = 0.01
    projection_floor: float = 0.02
    kappa_j_range: tuple[int, int] = (4, 10)
    angles: int = 720
    cosc: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    seed: int = 0

    @property
    def dim(self) -> int:
        return len(self.maps[0].translation)

    def ifs(self) -> IFS:
        return IFS([AffineMap(np.array(m.linear), np.array(m.translation)) for m in self.maps])

    def condensation_set(self) -> CondensationSet | None:
        return CondensationSet(self.condensation) if self.condensation else None

    def bounding_ball(self) -> BoundingBall | None:
        if self.ball is None:
            return None
        return BoundingBall(np.array(self.ball[0]), self.ball[1])

    def system(self) -> System:
        return normalize(self.ifs(), self.condensation_set(), self.bounding_ball())

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_SECTION_KEYS = {
    "system": {"dimension"},
    "map": {"linear", "translation"},
    "condensation": {"type", "center", "radius", "p", "q", "vertices", "points"},
    "ball": {"center", "radius"},
    "budget": {"stopping", "pressure"},
    "scales": {"jmin", "jmax", "window", "refine"},
    "affinity": {"kmax"},
    "tolerance": {"sandwich", "kappa", "projection"},
    "kappa": {"jmin", "jmax"},
    "projection": {"angles"},
    "cosc": {"lower", "upper"},
    "run": {"seed"},
}
_NUMBERED = {"map", "condensation"}
_PRIMITIVE_KEYS = {
    "circle": {"center", "radius"},
    "segment": {"p", "q"},
    "polygon": {"vertices"},
    "points": {"points"},
}


def _read_sections(text: str) -> dict:
    sections: dict[str, dict[str, tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z_]+)(?:\.(\d+))?\s*\]", line)
            if not m:
                raise ConfigSyntaxError(lineno, f"malformed section header {line!r}")
            base, num = m.group(1), m.group(2)
            if base not in _SECTION_KEYS:
                raise ConfigError(base, f"unknown section (line {lineno})")
            if (base in _NUMBERED) != (num is not None):
                want = f"[{base}.N]" if base in _NUMBERED else f"[{base}]"
                raise ConfigSyntaxError(lineno, f"section must be written {want}")
            current = base if num is None else f"{base}.{int(num)}"
            if current in sections:
                raise ConfigSyntaxError(lineno, f"duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigSyntaxError(lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigSyntaxError(lineno, "key outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            raise ConfigSyntaxError(lineno, f"bad key {key!r}")
        if key not in _SECTION_KEYS[current.split(".")[0]]:
            raise ConfigError(f"{current}.{key}", "unknown key")
        if key in sections[current]:
            raise ConfigSyntaxError(lineno, f"duplicate key {key!r}")
        if not value:
            raise ConfigSyntaxError(lineno, f"empty value for {key!r}")
        sections[current][key] = (lineno, value)
    return sections


def _get(sections, section, key, kind="value", default=None, required=False):
    entry = sections.get(section, {}).get(key)
    path = f"{section}.{key}"
    if entry is None:
        if required:
            raise ConfigError(path, "missing required key")
        return default
    lineno, text = entry
    try:
        if kind == "int":
            return int(text)
        if kind == "str":
            return text
        if kind == "range":
            lo, hi = text.split(":")
            return int(lo), int(hi)
        val = parse_value(text)
    except ValueError as exc:
        raise ConfigSyntaxError(lineno, f"{path}: {exc}") from None
    return val


def _vector(val, path, n=None):
    if not isinstance(val, list) or any(isinstance(v, list) for v in val):
        raise ConfigError(path, "expected a vector like [a, b]")
    if n is not None and len(val) != n:
        raise ConfigError(path, f"expected {n} components, got {len(val)}")
    return tuple(val)


def _scalar(val, path):
    if isinstance(val, list):
        raise ConfigError(path, "expected a number")
    return val


def _numbered(sections, base):
    keys = sorted((k for k in sections if k.startswith(base + ".")), key=lambda k: int(k.split(".")[1]))
    nums = [int(k.split(".")[1]) for k in keys]
    if nums != list(range(1, len(nums) + 1)):
        raise ConfigError(base, f"sections must be numbered 1..N consecutively, got {nums}")
    return keys


def parse_config(text: str) -> RunConfig:
    sections = _read_sections(text)

    map_keys = _numbered(sections, "map")
    if not map_keys:
        raise ConfigError("map", "at least one [map.N] section is required")
    n = _get(sections, "system", "dimension", "int")
    maps = []
    for key in map_keys:
        lin = _get(sections, key, "linear", required=True)
        if not isinstance(lin, list) or not all(isinstance(r, list) for r in lin):
            raise ConfigError(f"{key}.linear", "expected a matrix like [[a, b], [c, d]]")
        if n is None:
            n = len(lin)
        if len(lin) != n or any(len(r) != n or any(isinstance(v, list) for v in r) for r in lin):
            raise ConfigError(f"{key}.linear", f"expected a {n}x{n} matrix")
        tr = _get(sections, key, "translation", default=[0.0] * n)
        maps.append(MapSpec(tuple(tuple(r) for r in lin), _vector(tr, f"{key}.translation", n)))
    if n < 2:
        raise ConfigError("system.dimension", "dimension must be at least 2")

    prims = []
    for key in _numbered(sections, "condensation"):
        kind = _get(sections, key, "type", "str", required=True)
        if kind not in _PRIMITIVE_KEYS:
            raise ConfigError(f"{key}.type", f"unknown primitive {kind!r}")
        allowed = _PRIMITIVE_KEYS[kind] | {"type"}
        for extra in set(sections[key]) - allowed:
            raise ConfigError(f"{key}.{extra}", f"not a {kind} parameter")
        if kind != "points" and n != 2:
            raise ConfigError(f"{key}.type", f"{kind} primitives need dimension 2")
        if kind == "circle":
            radius = _scalar(_get(sections, key, "radius", required=True), f"{key}.radius")
            if not radius > 0:
                raise ConfigError(f"{key}.radius", "radius must be positive")
            prims.append(Circle(_vector(_get(sections, key, "center", required=True), f"{key}.center", n), radius))
        elif kind == "segment":
            prims.append(
                Segment(
                    _vector(_get(sections, key, "p", required=True), f"{key}.p", n),
                    _vector(_get(sections, key, "q", required=True), f"{key}.q", n),
                )
            )
        else:
            field_name = "vertices" if kind == "polygon" else "points"
            rows = _get(sections, key, field_name, required=True)
            if not isinstance(rows, list) or not rows:
                raise ConfigError(f"{key}.{field_name}", "expected a non-empty list of points")
            pts = tuple(_vector(r, f"{key}.{field_name}", n) for r in rows)
            if kind == "polygon" and len(pts) < 3:
                raise ConfigError(f"{key}.vertices", "a polygon needs at least 3 vertices")
            prims.append(Polygon(pts) if kind == "polygon" else PointCloud(pts))

    ball = None
    if "ball" in sections:
        center = _vector(_get(sections, "ball", "center", required=True), "ball.center", n)
        radius = _scalar(_get(sections, "ball", "radius", required=True), "ball.radius")
        if not radius > 0:
            raise ConfigError("ball.radius", "radius must be positive")
        ball = (center, radius)

    cosc = None
    if "cosc" in sections:
        if n != 2:
            raise ConfigError("cosc", "the rectangular COSC check is planar")
        lower = _vector(_get(sections, "cosc", "lower", required=True), "cosc.lower", 2)
        upper = _vector(_get(sections, "cosc", "upper", required=True), "cosc.upper", 2)
        if any(u <= l for l, u in zip(lower, upper)):
            raise ConfigError("cosc.upper", "upper corner must exceed lower corner")
        cosc = (lower, upper)

    defaults = RunConfig(maps=())
    j_range = (
        _get(sections, "scales", "jmin", "int", defaults.j_range[0]),
        _get(sections, "scales", "jmax", "int", defaults.j_range[1]),
    )
    kappa_range = (
        _get(sections, "kappa", "jmin", "int", defaults.kappa_j_range[0]),
        _get(sections, "kappa", "jmax", "int", defaults.kappa_j_range[1]),
    )
    cfg = RunConfig(
        maps=tuple(maps),
        condensation=tuple(prims),
        ball=ball,
        stopping_budget=_get(sections, "budget", "stopping", "int", defaults.stopping_budget),
        pressure_budget=_get(sections, "budget", "pressure", "int", defaults.pressure_budget),
        j_range=j_range,
        window=_get(sections, "scales", "window", "range"),
        refine=_get(sections, "scales", "refine", "int", defaults.refine),
        k_max=_get(sections, "affinity", "kmax", "int", defaults.k_max),
        tolerance=_scalar(_get(sections, "tolerance", "sandwich", default=defaults.tolerance), "tolerance.sandwich"),
        kappa_floor=_scalar(_get(sections, "tolerance", "kappa", default=defaults.kappa_floor), "tolerance.kappa"),
        projection_floor=_scalar(
            _get(sections, "tolerance", "projection", default=defaults.projection_floor), "tolerance.projection"
        ),
        kappa_j_range=kappa_range,
        angles=_get(sections, "projection", "angles", "int", defaults.angles),
        cosc=cosc,
        seed=_get(sections, "run", "seed", "int", defaults.seed),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Semantic checks that need the assembled objects."""
    for label, (lo, hi) in (("scales", cfg.j_range), ("kappa", cfg.kappa_j_range)):
        if lo < 1 or hi < lo:
            raise ConfigError(f"{label}.jmin", f"need 1 <= jmin <= jmax, got {lo}:{hi}")
    if cfg.j_range[1] - cfg.j_range[0] + 1 < 4:
        raise ConfigError("scales.jmax", "need at least 4 scales for a dimension estimate")
    if cfg.window is not None and not cfg.j_range[0] <= cfg.window[0] < cfg.window[1] <= cfg.j_range[1]:
        raise ConfigError("scales.window", "window must lie inside jmin:jmax and hold at least 2 scales")
    if cfg.refine < 0:
        raise ConfigError("scales.refine", "must be non-negative")
    if cfg.k_max < 1:
        raise ConfigError("affinity.kmax", "must be at least 1")
    if cfg.angles < 4:
        raise ConfigError("projection.angles", "need at least 4 angles")
    for label, v in (("budget.stopping", cfg.stopping_budget), ("budget.pressure", cfg.pressure_budget)):
        if v < 1:
            raise ConfigError(label, "must be positive")
    for i, _ in enumerate(cfg.maps):
        try:
            AffineMap(np.array(cfg.maps[i].linear), np.array(cfg.maps[i].translation))
        except InvalidMatrixError as exc:
            raise ConfigError(f"map.{i + 1}.linear", str(exc)) from None
    try:
        ifs = cfg.ifs()
    except NotContractingError as exc:
        raise ConfigError(f"map.{exc.index + 1}.linear", str(exc)) from None
    c = cfg.condensation_set()
    ball = cfg.bounding_ball()
    if ball is not None:
        if not ball.is_invariant(ifs, tol=1e-9 * ball.radius):
            raise ConfigError("ball", "ball is not mapped into itself by every map")
        if c is not None and not ball.contains(c.extreme_points(), tol=1e-9 * ball.radius):
            raise ConfigError("ball", "ball does not contain the condensation set")


def serialize(cfg: RunConfig) -> str:
    out = ["[system]", f"dimension = {cfg.dim}", ""]
    for i, m in enumerate(cfg.maps, start=1):
        out += [f"[map.{i}]", f"linear = {_fmt(m.linear)}", f"translation = {_fmt(m.translation)}", ""]
    for i, p in enumerate(cfg.condensation, start=1):
        out += [f"[condensation.{i}]", f"type = {p.kind}"]
        if isinstance(p, Circle):
            out += [f"center = {_fmt(p.center)}", f"radius = {_fmt(p.radius)}"]
        elif isinstance(p, Segment):
            out += [f"p = {_fmt(p.p)}", f"q = {_fmt(p.q)}"]
        elif isinstance(p, Polygon):
            out += [f"vertices = {_fmt(p.vertices)}"]
        else:
            out += [f"points = {_fmt(p.points)}"]
        out.append("")
    if cfg.ball is not None:
        out += ["[ball]", f"center = {_fmt(cfg.ball[0])}", f"radius = {_fmt(cfg.ball[1])}", ""]
    if cfg.cosc is not None:
        out += ["[cosc]", f"lower = {_fmt(cfg.cosc[0])}", f"upper = {_fmt(cfg.cosc[1])}", ""]
    out += ["[budget]", f"stopping = {cfg.stopping_budget}", f"pressure = {cfg.pressure_budget}", ""]
    out += ["[scales]", f"jmin = {cfg.j_range[0]}", f"jmax = {cfg.j_range[1]}", f"refine = {cfg.refine}"]
    if cfg.window is not None:
        out.append(f"window = {cfg.window[0]}:{cfg.window[1]}")
    out += ["", "[affinity]", f"kmax = {cfg.k_max}", ""]
    out += [
        "[tolerance]",
        f"sandwich = {_fmt(cfg.tolerance)}",
        f"kappa = {_fmt(cfg.kappa_floor)}",
        f"projection = {_fmt(cfg.projection_floor)}",
        "",
    ]
    out += ["[kappa]", f"jmin = {cfg.kappa_j_range[0]}", f"jmax = {cfg.kappa_j_range[1]}", ""]
    out += ["[projection]", f"angles = {cfg.angles}", ""]
    out += ["[run]", f"seed = {cfg.seed}"]
    return "\n".join(out) + "\n"


def resolve_path(name: str | Path) -> Path:
    """A config path, falling back to the bundled examples by file name."""
    path = Path(name)
    if path.exists():
        return path
    bundled = BUNDLED / path.name
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no such config: {name}")


def load_config(name: str | Path) -> RunConfig:
    return parse_config(resolve_path(name).read_text())
