"""
run_config.py
---------------------------
Run configurations for transport_cli.py.

A run config is a JSON document (grammar in docs/config_schema.md). Loading
happens in two passes:

    load_config / parse_config   JSON -> RunConfig (shape, ranges, CLI overrides)
    resolve                      RunConfig -> RunSetup (bundle, transport, paths, ...)

Both passes raise ConfigError carrying the dotted key path and, when it can
be located in the source text, the line number of the offending key. Nothing
numerical runs before resolution succeeds.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

import config
from bundle_models import BundleModel, FiberElement, bundle_from_config, element_from_config
from connection_engine import ConnectionModel, connection_from_config, transport_from_connection
from example_transports import (
    foliation_transport, functional_from_config, group_transport_left, group_transport_right,
)
from factorization import factorized_transport
from lie_groups import rotation2
from path_algebra import DomainError, PathSpec, path_from_config
from transport_core import SamplingPlan, TransportFamily, adversarial_transport, identity_transport

logger = logging.getLogger(__name__)

COMMANDS = ("transport", "check", "factorize", "holonomy", "reconstruct-horizontal")
SUITES = ("transport", "parallel", "axioms", "round-trip", "case-split", "continuity", "path-independence")
BACKENDS = ("foliation", "group-left", "group-right", "connection", "factorized", "adversarial", "identity")
TOP_LEVEL_KEYS = {
    "name", "bundle", "backend", "paths", "suites", "grid_size", "subintervals", "tolerance", "step",
    "seed", "out", "transports", "pairs", "factorize", "holonomy", "horizontal",
}


class ConfigError(ValueError):
    def __init__(self, message: str, key_path: str = "", line: Optional[int] = None, source: str = "<config>"):
        self.message = message
        self.key_path = key_path
        self.line = line
        self.source = source
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {key_path}: {message}" if key_path else f"{where}: {message}")


def _line_of(text: str, key_path: str) -> Optional[int]:
    """Line of the last locatable key of a dotted path, scanning keys in document order."""
    pos = None
    start = 0
    for part in key_path.split("."):
        if not part or part.isdigit():
            continue
        m = re.compile(rf'"{re.escape(part)}"\s*:').search(text, start)
        if m is None:
            break
        pos = start = m.start()
    if pos is None:
        return None
    return text.count("\n", 0, pos) + 1


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    bundle: Optional[dict] = None
    backend: Optional[dict] = None
    paths: tuple[dict, ...] = ()
    suites: tuple[str, ...] = ("transport",)
    grid_size: int = 11
    subintervals: tuple[tuple[float, float], ...] = ((0.25, 0.75), (0.0, 0.5))
    tolerance: Optional[float] = None
    step: Optional[float] = None
    seed: int = config.DEFAULT_SEED
    out: str = config.OUT_DIR
    transports: tuple[dict, ...] = ()
    pairs: tuple[tuple[str, str], ...] = ()
    factorize: dict = field(default_factory=dict)
    holonomy: dict = field(default_factory=dict)
    horizontal: dict = field(default_factory=dict)
    source: str = field(default="<config>", compare=False)
    text: str = field(default="", repr=False, compare=False)

    def error(self, message: str, key_path: str = "") -> ConfigError:
        return ConfigError(message, key_path, _line_of(self.text, key_path) if key_path else None, self.source)

    def echo(self) -> dict:
        """Settings as they were used (after overrides), for the report."""
        out = asdict(self)
        out.pop("text")
        out["source"] = Path(self.source).name
        return out


def _number(cfg_text: str, source: str, key: str, value, kind=float, positive: bool = True):
    try:
        number = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key, _line_of(cfg_text, key), source)
    if isinstance(number, float) and not math.isfinite(number):
        raise ConfigError(f"expected a finite number, got {value!r}", key, _line_of(cfg_text, key), source)
    if positive and number <= 0:
        raise ConfigError(f"must be positive, got {value!r}", key, _line_of(cfg_text, key), source)
    return number


def parse_config(text: str, source: str = "<config>", overrides: Optional[dict] = None) -> RunConfig:
    """Parse and shape-check a JSON run config; CLI overrides (seed, step, tolerance, out) win over the file."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, "", e.lineno, source) from e
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", "", 1, source)
    unknown = sorted(set(raw) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown key (known: {sorted(TOP_LEVEL_KEYS)})", unknown[0],
                          _line_of(text, unknown[0]), source)

    settings: dict[str, Any] = {"source": source, "text": text}
    for key in ("name", "bundle", "backend", "factorize", "holonomy", "horizontal"):
        if key in raw:
            settings[key] = raw[key]
    for key in ("paths", "transports"):
        if key in raw:
            if not isinstance(raw[key], list):
                raise ConfigError("expected a list", key, _line_of(text, key), source)
            settings[key] = tuple(raw[key])
    if "suites" in raw:
        suites = raw["suites"]
        if not isinstance(suites, list) or not suites:
            raise ConfigError("suite selection must be a nonempty list", "suites", _line_of(text, "suites"), source)
        bad = [s for s in suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; known: {list(SUITES)}", "suites", _line_of(text, "suites"), source)
        settings["suites"] = tuple(suites)
    if "grid_size" in raw:
        n = raw["grid_size"]
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"empty grid: grid_size must be a positive integer, got {n!r}", "grid_size",
                              _line_of(text, "grid_size"), source)
        settings["grid_size"] = n
    if "subintervals" in raw:
        subs = []
        for i, pair in enumerate(raw["subintervals"]):
            if not (isinstance(pair, list) and len(pair) == 2 and 0.0 <= pair[0] <= pair[1] <= 1.0):
                raise ConfigError(f"subinterval {pair!r} must be [a, b] with 0 <= a <= b <= 1",
                                  f"subintervals.{i}", _line_of(text, "subintervals"), source)
            subs.append((float(pair[0]), float(pair[1])))
        settings["subintervals"] = tuple(subs)
    if "pairs" in raw:
        settings["pairs"] = tuple(tuple(str(n) for n in pair) for pair in raw["pairs"])
    for key in ("tolerance", "step"):
        if raw.get(key) is not None:
            settings[key] = _number(text, source, key, raw[key])
    if "seed" in raw:
        settings["seed"] = _number(text, source, "seed", raw["seed"], int, positive=False)
    if "out" in raw:
        settings["out"] = str(raw["out"])

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("tolerance", "step") and not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"--{'tol' if key == 'tolerance' else key} must be positive, got {value}", key,
                              None, "<command line>")
        settings[key] = value
    cfg = RunConfig(**settings)
    logger.debug(f"Parsed config {source}: {len(cfg.paths)} paths, suites {list(cfg.suites)}")
    return cfg


def load_config(path: str | Path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", "", None, str(path)) from e
    return parse_config(text, str(path), overrides)


# ───────────────────────────────────────────────
# Resolution
# ───────────────────────────────────────────────

@dataclass(frozen=True)
class TransportTask:
    path: PathSpec
    s: float
    t: float
    element: Optional[FiberElement] = None
    expected: Optional[dict] = None


@dataclass(frozen=True)
class RunSetup:
    config: RunConfig
    bundle: Optional[BundleModel]
    transport: Optional[TransportFamily]
    connection: Optional[ConnectionModel]
    paths: tuple[PathSpec, ...]
    tasks: tuple[TransportTask, ...] = ()
    pairs: tuple[tuple[PathSpec, PathSpec], ...] = ()
    points: tuple[FiberElement, ...] = ()
    expected: Optional[np.ndarray] = None

    def plan(self, paths: tuple[PathSpec, ...] | None = None) -> SamplingPlan:
        return SamplingPlan(
            paths or self.paths,
            grid_size=self.config.grid_size,
            subintervals=self.config.subintervals,
            seed=self.config.seed,
        )

    def path(self, ref) -> PathSpec:
        for p in self.paths:
            if p.name == str(ref):
                return p
        if isinstance(ref, int) and 0 <= ref < len(self.paths):
            return self.paths[ref]
        raise KeyError(ref)


class _Resolver:
    """Turns config fragments into model objects, translating failures into ConfigError."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def guard(self, key_path: str, build, *args, **kwargs):
        try:
            return build(*args, **kwargs)
        except ConfigError:
            raise
        except KeyError as e:
            raise self.cfg.error(f"missing or unknown key {e}", key_path) from e
        except (TypeError, ValueError, ArithmeticError) as e:
            raise self.cfg.error(str(e), key_path) from e

    def backend(self, mapping: dict, bundle: Optional[BundleModel], key: str):
        """(transport, connection, bundle) for a backend descriptor."""
        cfg = self.cfg
        kind = mapping.get("kind")
        if kind not in BACKENDS:
            raise cfg.error(f"unknown backend {kind!r}; known: {list(BACKENDS)}", f"{key}.kind")
        if kind == "connection":
            c = self.guard(f"{key}.connection", connection_from_config, mapping["connection"])
            if bundle is not None and bundle.describe() != c.bundle.describe():
                logger.warning(f"bundle {bundle.describe()} replaced by the connection's {c.bundle.describe()}")
            return transport_from_connection(c, cfg.step), c, c.bundle
        if kind in ("adversarial", "factorized"):
            if "inner" not in mapping:
                raise cfg.error(f"{kind} backend wraps an 'inner' backend", key)
            inner, c, bundle = self.backend(mapping["inner"], bundle, f"{key}.inner")
            if kind == "adversarial":
                T = self.guard(f"{key}.defect", adversarial_transport, inner, float(mapping.get("defect", 0.1)))
            else:
                T = self.guard(f"{key}.anchor", factorized_transport, inner, float(mapping.get("anchor", 0.0)))
            return T, c, bundle
        if bundle is None:
            raise cfg.error(f"backend {kind!r} needs a 'bundle'", key)
        if kind == "identity":
            return identity_transport(bundle), None, bundle
        if kind == "foliation":
            return self.guard(key, foliation_transport, bundle), None, bundle
        if bundle.fiber_kind != "group":
            raise cfg.error(f"backend {kind!r} needs a group fibre, bundle has {bundle.fiber_kind!r}", "bundle")
        group = bundle.fiber.group
        f = self.guard(f"{key}.functional", functional_from_config, mapping.get("functional", {}), group)
        build = group_transport_left if kind == "group-left" else group_transport_right
        return build(f, group, bundle=bundle), None, bundle

    def paths(self, bundle: Optional[BundleModel]) -> tuple[PathSpec, ...]:
        out = []
        for i, mapping in enumerate(self.cfg.paths):
            key = f"paths.{i}"
            if not isinstance(mapping, dict):
                raise self.cfg.error("path entries must be objects", key)
            p = self.guard(key, path_from_config, {"name": f"path{i}", **mapping})
            if bundle is not None:
                self.guard(key, bundle.base.check, p.start)
                self.guard(key, bundle.base.check, p.end)
            out.append(p)
        names = [p.name for p in out]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise self.cfg.error(f"duplicate path names {dupes}", "paths")
        return tuple(out)

    def tasks(self, setup: RunSetup) -> tuple[TransportTask, ...]:
        out = []
        for i, mapping in enumerate(self.cfg.transports):
            key = f"transports.{i}"
            try:
                p = setup.path(mapping.get("path", 0))
            except KeyError:
                raise self.cfg.error(f"unknown path {mapping.get('path')!r}", f"{key}.path")
            s = float(mapping.get("s", p.domain.lo))
            t = float(mapping.get("t", p.domain.hi))
            for which, value in (("s", s), ("t", t)):
                if not p.domain.contains(value):
                    raise self.cfg.error(f"{value} outside {p.domain}", f"{key}.{which}")
            element = None
            if "element" in mapping:
                element = self.guard(f"{key}.element", element_from_config, setup.bundle,
                                     {"base": p.eval(s).tolist(), **mapping["element"]})
            expected = mapping.get("expected")
            if expected is not None and not ({"payload", "scale"} & set(expected)):
                raise self.cfg.error("expected needs 'payload' or 'scale'", f"{key}.expected")
            out.append(TransportTask(p, s, t, element, expected))
        return tuple(out)

    def points(self, bundle: BundleModel) -> tuple[FiberElement, ...]:
        spec = self.cfg.horizontal.get("points", {"count": 10})
        key = "horizontal.points"
        if isinstance(spec, list):
            return tuple(self.guard(f"{key}.{i}", element_from_config, bundle, m) for i, m in enumerate(spec))
        rng = np.random.default_rng([self.cfg.seed, 7])
        count = int(spec.get("count", 10))
        box = spec.get("box")
        out = []
        for _ in range(count):
            if box is not None:
                x = np.array([rng.uniform(lo, hi) for lo, hi in box])
            else:
                x = bundle.base.sample(rng)
            fibre = self.guard(key, bundle.fiber_at, x)
            u = fibre.samples(rng, 1)[0]
            if spec.get("unit_payload") and bundle.fiber_kind in ("vector", "leaf"):
                u = fibre.element(u.payload / np.linalg.norm(u.payload))
            out.append(u)
        return tuple(out)

    def expected_holonomy(self) -> Optional[np.ndarray]:
        spec = self.cfg.holonomy.get("expected")
        if spec is None:
            return None
        if "rotation" in spec:
            return rotation2(float(spec["rotation"]))
        if "matrix" in spec:
            return np.asarray(spec["matrix"], dtype=float)
        raise self.cfg.error("expected holonomy needs 'rotation' or 'matrix'", "holonomy.expected")


REQUIRED = {
    "transport": ("backend", "paths"),
    "check": ("backend", "paths"),
    "factorize": ("paths",),
    "holonomy": ("backend", "paths"),
    "reconstruct-horizontal": ("backend",),
}


def resolve(cfg: RunConfig, command: str) -> RunSetup:
    """Build every model object the command needs; the first failure raises ConfigError."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", "", None, cfg.source)
    for key in REQUIRED[command]:
        if not getattr(cfg, key):
            raise cfg.error(f"command {command!r} needs a nonempty {key!r}", key)
    if command == "factorize" and not cfg.backend and not cfg.factorize.get("finite") \
            and not cfg.factorize.get("gauge"):
        raise cfg.error("factorize needs a backend or a 'finite'/'gauge' block", "factorize")

    r = _Resolver(cfg)
    bundle = r.guard("bundle", bundle_from_config, cfg.bundle) if cfg.bundle else None
    T = c = None
    if cfg.backend:
        T, c, bundle = r.backend(cfg.backend, bundle, "backend")
    if command == "holonomy" and c is None:
        raise cfg.error("holonomy needs a connection backend", "backend.kind")
    paths = r.paths(bundle)
    setup = RunSetup(cfg, bundle, T, c, paths)

    if command == "transport":
        setup = replace(setup, tasks=r.tasks(setup))
    if "path-independence" in cfg.suites and command == "check":
        pairs = []
        for i, (a, b) in enumerate(cfg.pairs):
            try:
                pairs.append((setup.path(a), setup.path(b)))
            except KeyError as e:
                raise cfg.error(f"unknown path {e}", f"pairs.{i}") from e
        if not pairs:
            raise cfg.error("path-independence needs 'pairs' of path names", "suites")
        setup = replace(setup, pairs=tuple(pairs))
    if command == "reconstruct-horizontal":
        if bundle.fiber_kind == "finite":
            raise cfg.error("horizontal spaces need a continuous fibre", "bundle")
        setup = replace(setup, points=r.points(bundle))
    if command == "holonomy":
        setup = replace(setup, expected=r.expected_holonomy())
        for p in paths:
            if not bundle.base.same_point(p.start, p.end):
                raise cfg.error(f"path {p.name!r} is not a closed loop", "paths")
    logger.info(f"Resolved {cfg.source}: backend {T}, {len(paths)} paths")
    return setup


def unit_domain_fraction(p: PathSpec, frac: float) -> float:
    """Parameter at a fraction of a path's domain."""
    if not 0.0 <= frac <= 1.0:
        raise DomainError(f"domain fraction must lie in [0, 1], got {frac}")
    return p.domain.lo + frac * p.domain.length

