"""JSON run configuration for simulation campaigns and distillation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .core import DEFAULT_P_S, ClassFluxes, ProtocolConfig
from .finitesize import FluctuationPolicy
from .optics import DEFAULT_TBP, overlap_from_visibility, visibility_from_measurements
from .simulator import ChannelConfig, DetectorModel, SimulationMode, detector_preset


class ConfigError(ValueError):
    """The configuration file is unreadable or violates the schema."""


_FLUXES = {
    "type": "object",
    "properties": {k: {"type": "number", "minimum": 0} for k in "suvw"},
    "required": list("suvw"),
    "additionalProperties": False,
}

_PROB = {"type": "number", "minimum": 0, "maximum": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "protocol": {
            "type": "object",
            "properties": {
                "fluxes": _FLUXES,
                "fluxes_a": _FLUXES,
                "fluxes_b": _FLUXES,
                "p_s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "f_ec": {"type": "number", "exclusiveMinimum": 1},
                "clock_hz": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "detector": {
            "type": "object",
            "properties": {
                "preset": {"enum": ["room_20C", "cold_0C"]},
                "efficiency": _PROB,
                "dark_prob_per_gate": _PROB,
                "afterpulse_prob": _PROB,
                "afterpulse_window_fraction": _PROB,
            },
            "additionalProperties": False,
        },
        "channel": {
            "type": "object",
            "properties": {
                "total_attenuation_db": {"type": "number", "minimum": 0},
                "attenuation_db_a": {"type": "number", "minimum": 0},
                "attenuation_db_b": {"type": "number", "minimum": 0},
                "label": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "mode": {"enum": [m.value for m in SimulationMode]},
                "rounds": {"type": "number", "minimum": 1},
                "duration_s": {"type": "number", "exclusiveMinimum": 0},
                "x_rounds_per_pair": {"type": "number", "minimum": 1},
                "x_duration_s": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "overlap": _PROB,
                "overlap_from": {
                    "type": "object",
                    "properties": {
                        "jitter_ps": {"type": "number", "minimum": 0},
                        "bandwidth_ghz": {"type": "number", "exclusiveMinimum": 0},
                        "fwhm_ps": {"type": "number", "exclusiveMinimum": 0},
                        "tbp": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "required": ["jitter_ps", "bandwidth_ghz"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "distillation": {
            "type": "object",
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "finite_size": {"type": "boolean"},
                "sigmas": {"type": "number", "minimum": 0},
                "merge_bell": {"type": ["boolean", "null"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    detector: DetectorModel = field(default_factory=lambda: detector_preset("room_20C"))
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig.from_total(2.33))
    mode: SimulationMode = SimulationMode.MONTE_CARLO
    rounds: float | None = None
    duration_s: float | None = None
    x_rounds_per_pair: float | None = None
    x_duration_s: float | None = None
    seed: int = 0
    overlap: float = 1.0
    K: int = 7
    fluct: FluctuationPolicy | None = None
    merge_bell: bool | None = None

    def campaign_kwargs(self) -> dict:
        rounds, duration = self.rounds, self.duration_s
        if rounds is None and duration is None:
            duration = 0.08
        return dict(
            rounds=rounds,
            duration_s=duration,
            seed=self.seed,
            mode=self.mode,
            x_rounds_per_pair=self.x_rounds_per_pair,
            x_duration_s=self.x_duration_s,
        )


def _fluxes(d: dict) -> ClassFluxes:
    return ClassFluxes(d["s"], d["u"], d["v"], d["w"])


def parse_config(doc: dict) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = RunConfig()
    try:
        p = doc.get("protocol", {})
        both = p.get("fluxes")
        fa = _fluxes(p["fluxes_a"]) if "fluxes_a" in p else (_fluxes(both) if both else cfg.protocol.fluxes_a)
        fb = _fluxes(p["fluxes_b"]) if "fluxes_b" in p else (_fluxes(both) if both else cfg.protocol.fluxes_b)
        cfg.protocol = ProtocolConfig(
            fa, fb, p.get("p_s", DEFAULT_P_S), p.get("f_ec", 1.16), p.get("clock_hz", 1e9)
        )

        d = dict(doc.get("detector", {}))
        base = detector_preset(d.pop("preset", "room_20C"))
        cfg.detector = DetectorModel(
            d.get("efficiency", base.efficiency),
            d.get("dark_prob_per_gate", base.dark_prob_per_gate),
            d.get("afterpulse_prob", base.afterpulse_prob),
            base.temperature_label if not d else None,
            d.get("afterpulse_window_fraction", base.afterpulse_window_fraction),
        )

        c = doc.get("channel", {})
        if "total_attenuation_db" in c:
            if "attenuation_db_a" in c or "attenuation_db_b" in c:
                raise ConfigError("channel: give total_attenuation_db or per-arm values, not both")
            cfg.channel = ChannelConfig.from_total(c["total_attenuation_db"], c.get("label"))
        elif "attenuation_db_a" in c or "attenuation_db_b" in c:
            a, b = c.get("attenuation_db_a", 0.0), c.get("attenuation_db_b", 0.0)
            cfg.channel = ChannelConfig(a, b, c.get("label", f"{a + b:g} dB total"))

        s = doc.get("simulation", {})
        cfg.mode = SimulationMode(s.get("mode", "monte_carlo"))
        for key in ("rounds", "duration_s", "x_rounds_per_pair", "x_duration_s"):
            setattr(cfg, key, s.get(key))
        cfg.seed = s.get("seed", 0)
        if "overlap" in s and "overlap_from" in s:
            raise ConfigError("simulation: give overlap or overlap_from, not both")
        if "overlap_from" in s:
            o = s["overlap_from"]
            vis = visibility_from_measurements(
                o["jitter_ps"], o["bandwidth_ghz"], o.get("fwhm_ps", 35.0), tbp=o.get("tbp", DEFAULT_TBP)
            )
            cfg.overlap = overlap_from_visibility(vis)
        else:
            cfg.overlap = s.get("overlap", 1.0)

        dd = doc.get("distillation", {})
        cfg.K = dd.get("K", 7)
        if dd.get("finite_size", False):
            cfg.fluct = FluctuationPolicy(dd.get("sigmas", 7.0))
        cfg.merge_bell = dd.get("merge_bell")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc)
