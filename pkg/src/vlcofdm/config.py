"""Line-oriented run configuration.

A config file is INI-style text. Sections ``[room]``, ``[transmitter]``,
``[receiver]`` and ``[sim]`` are shared by every curve; each
``[scheme]`` or ``[scheme <label>]`` section adds one curve. Unset keys
take the defaults listed in :data:`SCHEMA`, which reproduce the
reference indoor setup. Example::

    [transmitter]
    count = 4

    [receiver]
    count = 4

    [scheme ndc256]
    kind = ndc
    order = 256
    leds = 2, 3

    [sim]
    snr = 30:2:50

``snr`` and ``dtx`` accept either ``start:step:stop`` (stop included) or
a comma-separated list. A non-empty ``dtx`` turns the run into an LED
spacing sweep at every listed SNR.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .channel import GeometryConfig
from .ofdm import QAM_ORDERS
from .schemes import Kind, SchemeConfig, make_scheme
from .sim import SimConfig

__all__ = ["ConfigError", "RunSpec", "RunConfig", "SCHEMA", "parse_config", "load_config", "parse_range", "schema_text"]

PRESETS_DIR = Path(__file__).with_name("data") / "presets"
PRESETS = ("fig4", "fig5", "fig6", "fig8", "fig9")


class ConfigError(ValueError):
    """Invalid configuration, located by source, line and field when known."""

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None, field: str | None = None):
        self.message, self.source, self.line, self.field = message, source, line, field
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
        if self.field:
            where += f": {self.field}"
        return f"{where}: {self.message}"


# --- value parsers ---------------------------------------------------------

def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _positive(s: str) -> float:
    v = _float(s)
    if v <= 0:
        raise ValueError("must be > 0")
    return v


def _nonneg(s: str) -> float:
    v = _float(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _angle(s: str) -> float:
    v = _float(s)
    if not 0 < v < 90:
        raise ValueError("must lie strictly between 0 and 90 degrees")
    return v


def _int(s: str) -> int:
    if not re.fullmatch(r"[+-]?\d+", s.strip().replace("_", "")):
        # allow 1e8-style counts when they are integral
        v = float(s)
        if not v.is_integer():
            raise ValueError("must be an integer")
        return int(v)
    return int(s.replace("_", ""))


def _posint(s: str) -> int:
    v = _int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        t = s.strip().lower()
        if t not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return t

    return parse


def parse_range(s: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive) or a comma list; empty text gives ``()``."""
    s = s.strip()
    if not s:
        return ()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError("range must look like start:step:stop")
        start, step, stop = (_float(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ValueError("step must be nonzero and point from start towards stop")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _device_count(s: str) -> int:
    n = _int(s)
    if n not in (1, 2, 4):
        raise ValueError("must be 1, 2 or 4")
    return n


def _qam_order(s: str) -> int:
    n = _int(s)
    if n not in QAM_ORDERS:
        raise ValueError(f"must be one of {', '.join(map(str, QAM_ORDERS))}")
    return n


def _index_list(s: str) -> tuple[int, ...] | None:
    s = s.strip()
    if not s or s.lower() == "all":
        return None
    return tuple(_posint(p) for p in s.split(","))


# section -> key -> (parser, default text, help)
SCHEMA: dict[str, dict[str, tuple[Callable, str, str]]] = {
    "room": {
        "length": (_positive, "5.0", "room extent along x, m"),
        "width": (_positive, "5.0", "room extent along y, m"),
        "height": (_positive, "3.5", "room height, m"),
    },
    "transmitter": {
        "count": (_device_count, "2", "LEDs: 1, 2 (row along x) or 4 (square grid)"),
        "spacing": (_positive, "1.0", "LED spacing d_tx, m"),
        "height": (_nonneg, "3.0", "LED mounting height, m"),
        "half_power_semiangle": (_angle, "60", "degrees"),
    },
    "receiver": {
        "count": (_device_count, "2", "photodetectors: 1, 2 or 4"),
        "spacing": (_positive, "0.1", "detector spacing d_rx, m"),
        "height": (_nonneg, "0.8", "detector height, m"),
        "area": (_positive, "1e-4", "detector area, m^2"),
        "fov": (_angle, "85", "field of view (half angle), degrees"),
        "responsivity": (_positive, "1.0", "A/W"),
    },
    "scheme": {
        "kind": (_choice(*(k.value for k in Kind)), "", "dco, aco, flip, ndc, indc or cindc (required)"),
        "order": (_qam_order, "", "QAM order M, or M_c for cindc (required)"),
        "n_fft": (_posint, "64", "IFFT size, multiple of 4"),
        "bias_db": (_nonneg, "7", "DCO bias in dB"),
        "parallel_blocks": (_posint, "2", "independent streams for dco/aco/flip"),
        "leds": (_index_list, "all", "1-based LEDs driven by this scheme, e.g. 2, 3"),
        "code_n": (_posint, "1008", "LDPC length (cindc)"),
        "code_k": (_posint, "504", "LDPC dimension (cindc)"),
        "code_seed": (_int, "1", "PEG construction seed (cindc)"),
        "ldpc_iters": (_posint, "50", "maximum decoder iterations (cindc)"),
        "llr_input": (_choice("soft", "hard"), "soft", "decoder input for index bits (cindc)"),
        "genie_index": (_bool, "", "error-free index bits (indc); empty inherits [sim]"),
    },
    "sim": {
        "snr": (parse_range, "", "SNR points in dB"),
        "min_errors": (_posint, "200", "stop a point after this many bit errors"),
        "max_uses": (_posint, "100000000", "or after this many channel uses"),
        "seed": (_int, "1", "master seed"),
        "workers": (_posint, "1", "worker processes"),
        "genie_index": (_bool, "false", "error-free index bits for indc curves"),
        "snr_reference": (_choice("received", "closed_form"), "received", "how received power is averaged"),
        "trial_uses": (_posint, "16384", "channel uses per trial"),
        "noise_sigma": (lambda s: None if not s.strip() else _nonneg(s), "", "fixed noise std; snr then only labels points"),
        "dtx": (parse_range, "", "LED spacings for a spacing sweep, m"),
    },
}


def schema_text() -> str:
    """Human-readable listing of every section and key with its default."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]" if sec != "scheme" else "[scheme] / [scheme <label>]  (one per curve)")
        for key, (_, default, help_) in keys.items():
            out.append(f"  {key:<22} default {default or '-':<12} {help_}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class RunSpec:
    """One curve: a label and its fully resolved simulation config."""

    label: str
    sim: SimConfig


@dataclass(frozen=True)
class RunConfig:
    runs: tuple[RunSpec, ...]
    dtx: tuple[float, ...]
    text: str
    """Resolved config with every default written out; parses back to itself."""

    @property
    def is_spacing_sweep(self) -> bool:
        return bool(self.dtx)


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    where: dict[tuple[str, str | None], int] = {}
    sec = None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            sec = m.group(1).strip()
            where.setdefault((sec, None), no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and sec is not None:
            where.setdefault((sec, m.group(1).strip().lower()), no)
    return where


def _split_override(key: str) -> tuple[str, str]:
    if "." not in key:
        raise ConfigError(f"override {key!r} must look like section.key")
    sec, k = key.rsplit(".", 1)
    return sec, k


def parse_config(text: str, source: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse and validate config text.

    ``overrides`` maps ``section.key`` to raw text and wins over the file;
    the key ``sim.snr`` etc. applies to the shared section, and a bare
    ``scheme.key`` override applies to every scheme section.
    """
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("text before the first [section] header", source=source, line=e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"section [{e.section}] appears twice", source=source, line=e.lineno) from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"key repeated in [{e.section}]", source=source, line=e.lineno, field=e.option) from None
    except configparser.ParsingError as e:
        ln = e.errors[0][0] if e.errors else None
        raise ConfigError("line is not 'key = value'", source=source, line=ln) from None

    def err(msg, sec, key=None):
        return ConfigError(msg, source=source, line=lines.get((sec, key)) or lines.get((sec, None)),
                           field=f"{sec}.{key}" if key else f"[{sec}]")

    raw: dict[str, dict[str, str]] = {}
    scheme_secs: list[str] = []
    for sec in cp.sections():
        base = sec.split(None, 1)[0].lower()
        if base not in SCHEMA or (base != "scheme" and base != sec):
            raise err(f"unknown section [{sec}]; expected one of {', '.join(SCHEMA)}", sec)
        for key in cp[sec]:
            if key not in SCHEMA[base]:
                raise err(f"unknown key {key!r}; valid keys: {', '.join(SCHEMA[base])}", sec, key)
        raw[sec] = dict(cp[sec])
        if base == "scheme":
            scheme_secs.append(sec)
    if not scheme_secs:
        raise ConfigError("no [scheme] section: nothing to simulate", source=source)

    for k, v in (overrides or {}).items():
        sec, key = _split_override(k)
        base = sec.split(None, 1)[0]
        if base not in SCHEMA or key not in SCHEMA[base]:
            raise ConfigError(f"unknown override {k!r}", source="command line", field=k)
        targets = scheme_secs if sec == "scheme" else [sec]
        for t in targets:
            raw.setdefault(t, {})[key] = str(v)

    values: dict[str, dict] = {}
    for sec in ("room", "transmitter", "receiver", "sim", *scheme_secs):
        base = sec.split(None, 1)[0]
        got = raw.get(sec, {})
        vals = {}
        for key, (parse, default, _) in SCHEMA[base].items():
            txt = got.get(key, default)
            if base == "scheme" and key in ("kind", "order") and not txt.strip():
                raise err(f"missing required key {key!r}", sec, key)
            if base == "scheme" and key == "genie_index" and not txt.strip():
                vals[key] = None
                continue
            try:
                vals[key] = parse(txt)
            except ValueError as e:
                raise err(f"bad value {txt!r}: {e}", sec, key) from None
        values[sec] = vals

    room, tx, rx, sim = (values[s] for s in ("room", "transmitter", "receiver", "sim"))
    geom = GeometryConfig(
        n_tx=tx["count"], n_rx=rx["count"], d_tx=tx["spacing"], d_rx=rx["spacing"],
        room=(room["length"], room["width"], room["height"]), led_height=tx["height"], pd_height=rx["height"],
        half_power_semiangle=tx["half_power_semiangle"], area=rx["area"], fov=rx["fov"],
        responsivity=rx["responsivity"],
    )
    if tx["height"] > room["height"]:
        raise err("LEDs must be mounted at or below the ceiling", "transmitter", "height")
    if rx["height"] >= tx["height"]:
        raise err("detectors must sit below the LEDs", "receiver", "height")
    for sec, vals in (("transmitter", tx), ("receiver", rx)):
        if vals["count"] > 1 and vals["spacing"] >= min(room["length"], room["width"]):
            raise err("devices would be placed outside the room", sec, "spacing")
    try:
        geom.build()
    except ValueError as e:
        raise ConfigError(f"invalid geometry: {e}", source=source, field="[room]/[transmitter]/[receiver]") from None
    if not sim["snr"]:
        raise err("no SNR points: set snr", "sim", "snr")
    for d in sim["dtx"]:
        try:
            replace(geom, d_tx=d).build()
        except ValueError as e:
            raise err(f"spacing {d:g} m is invalid: {e}", "sim", "dtx") from None
    if sim["dtx"] and tx["count"] != 4:
        raise err("a spacing sweep needs transmitter.count = 4", "sim", "dtx")

    runs = []
    labels = set()
    for sec in scheme_secs:
        v = values[sec]
        label = sec.split(None, 1)[1].strip() if " " in sec else f"{v['kind']}-M{v['order']}"
        if label in labels:
            raise err(f"duplicate curve label {label!r}", sec)
        labels.add(label)
        genie = sim["genie_index"] if v["genie_index"] is None else v["genie_index"]
        if genie and v["kind"] != "indc":
            if v["genie_index"] is not None:
                raise err("genie_index applies to indc only", sec, "genie_index")
            genie = False
        try:
            sc = SchemeConfig(
                kind=v["kind"], order=v["order"], n_fft=v["n_fft"], bias_db=v["bias_db"],
                parallel_blocks=v["parallel_blocks"], code_n=v["code_n"], code_k=v["code_k"],
                code_seed=v["code_seed"], ldpc_iters=v["ldpc_iters"], soft_index=v["llr_input"] == "soft",
            )
        except ValueError as e:
            raise err(str(e), sec) from None
        g = replace(geom, led_subset=v["leds"])
        try:
            n_led = g.build().n_tx
        except ValueError as e:
            raise err(str(e), sec, "leds") from None
        need = make_scheme(sc).n_tx
        if n_led != need:
            raise err(f"{v['kind']} drives {need} LEDs but {n_led} are selected", sec, "leds")
        try:
            simcfg = SimConfig(
                scheme=sc, geometry=g, snrs=sim["snr"], min_errors=sim["min_errors"], max_uses=sim["max_uses"],
                seed=sim["seed"], genie_index=genie, sigma_override=sim["noise_sigma"],
                snr_reference=sim["snr_reference"], trial_uses=sim["trial_uses"], workers=sim["workers"], label=label,
            )
        except ValueError as e:
            raise err(str(e), sec) from None
        runs.append(RunSpec(label, simcfg))

    return RunConfig(tuple(runs), tuple(sim["dtx"]), _render(raw, scheme_secs))


def _render(raw: dict[str, dict[str, str]], scheme_secs: list[str]) -> str:
    out = []
    for sec in ("room", "transmitter", "receiver", *scheme_secs, "sim"):
        base = sec.split(None, 1)[0]
        out.append(f"[{sec}]")
        got = raw.get(sec, {})
        for key, (_, default, _) in SCHEMA[base].items():
            txt = got.get(key, default).strip()
            if txt:
                out.append(f"{key} = {txt}")
        out.append("")
    return "\n".join(out)


def load_config(path=None, *, preset: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Load a config file or a named preset (exactly one of the two)."""
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config path or a preset name")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}", field="preset")
        p = PRESETS_DIR / f"{preset}.ini"
    else:
        p = Path(path)
    try:
        text = p.read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config: {e}", source=str(p)) from None
    return parse_config(text, source=str(p), overrides=overrides)
