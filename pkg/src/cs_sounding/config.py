"""Experiment configuration: schema, loading, and validation.

Config files are YAML or JSON (JSON is parsed with JSON semantics, then
YAML is tried). All cross-field constraints are checked up front and
reported together with dotted field names, so a bad file fails before any
work starts.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import yaml

from .channel import PdpSpec, bin_pdp

ALGORITHMS = ("cosamp", "omp")
POWER_MODES = ("uniform", "boosted")
FEEDBACK_MODES = ("SU", "MU")


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists every offending field."""


@dataclass(frozen=True)
class DimsConfig:
    n_dft: int = 256
    n_t: int = 4
    n_r: int = 2


@dataclass(frozen=True)
class CorrelationConfig:
    rho_tx: float = 0.0
    rho_rx: float = 0.0


@dataclass(frozen=True)
class RecoveryConfigSection:
    kappa: int = 50
    tau: float = 1e-6
    i_max: int = 50
    algorithm: str = "cosamp"
    resolve_after_prune: bool = False


@dataclass(frozen=True)
class SoundingConfig:
    seed: int = 1
    n_kappa: int = 200
    snr_db: float | None = None
    power_mode: str = "uniform"
    threshold_db: float | None = None
    usable_tones: tuple[int, ...] | None = None


@dataclass(frozen=True)
class FeedbackConfig:
    mode: str = "MU"
    quant_bits: int | None = None
    n_tones: int = 234
    ltf_duration_us: float = 12.0


@dataclass(frozen=True)
class ExperimentConfig:
    dims: DimsConfig = field(default_factory=DimsConfig)
    pdp: object = "default"
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    recovery: RecoveryConfigSection = field(default_factory=RecoveryConfigSection)
    sounding: SoundingConfig = field(default_factory=SoundingConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    trials: int = 1
    master_seed: int = 0
    output: str = "results"

    def with_n_kappa(self, n_kappa: int) -> "ExperimentConfig":
        return replace(self, sounding=replace(self.sounding, n_kappa=n_kappa))

    def resolve_pdp(self, base_dir: str = ".") -> PdpSpec:
        return _resolve_pdp(self.pdp, base_dir)

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(out["sounding"]["usable_tones"], tuple):
            out["sounding"]["usable_tones"] = list(out["sounding"]["usable_tones"])
        return out


def _resolve_pdp(pdp, base_dir: str) -> PdpSpec:
    if isinstance(pdp, PdpSpec):
        return pdp
    if isinstance(pdp, str):
        if pdp == "default":
            return PdpSpec.default()
        path = pdp if os.path.isabs(pdp) else os.path.join(base_dir, pdp)
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"pdp: cannot read profile file {path!r}: {exc}") from exc
        return _pdp_from_mapping(data, f"pdp file {path!r}")
    if isinstance(pdp, dict):
        return _pdp_from_mapping(pdp, "pdp")
    raise ConfigError(
        f"pdp: expected 'default', a file path, or an inline profile, got {type(pdp).__name__}"
    )


def _pdp_from_mapping(data, label: str) -> PdpSpec:
    try:
        return PdpSpec.from_records(data["taps"], data["sample_period_ns"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(
            f"{label}: needs 'sample_period_ns' and 'taps' "
            f"(list of {{delay_ns, power_db}}): {exc}"
        ) from exc


def _build_section(cls, data, label: str, errors: list[str]):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        errors.append(f"{label}: expected a mapping, got {type(data).__name__}")
        return cls()
    known = {f_.name for f_ in cls.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        errors.append(
            f"{label}: unknown keys {sorted(unknown)} (expected {sorted(known)})"
        )
    kwargs = {k: v for k, v in data.items() if k in known}
    if "usable_tones" in kwargs and kwargs["usable_tones"] is not None:
        kwargs["usable_tones"] = tuple(int(t) for t in kwargs["usable_tones"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{label}: {exc}")
        return cls()


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    errors: list[str] = []
    top_known = {"dims", "pdp", "correlation", "recovery", "sounding",
                 "feedback", "trials", "master_seed", "output"}
    unknown = set(data) - top_known
    if unknown:
        errors.append(f"unknown top-level keys {sorted(unknown)}")
    cfg = ExperimentConfig(
        dims=_build_section(DimsConfig, data.get("dims"), "dims", errors),
        pdp=data.get("pdp", "default"),
        correlation=_build_section(CorrelationConfig, data.get("correlation"),
                                   "correlation", errors),
        recovery=_build_section(RecoveryConfigSection, data.get("recovery"),
                                "recovery", errors),
        sounding=_build_section(SoundingConfig, data.get("sounding"),
                                "sounding", errors),
        feedback=_build_section(FeedbackConfig, data.get("feedback"),
                                "feedback", errors),
        trials=data.get("trials", 1),
        master_seed=data.get("master_seed", 0),
        output=data.get("output", "results"),
    )
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def validate_config(cfg: ExperimentConfig, base_dir: str = ".") -> None:
    """Check every cross-field constraint; raise ConfigError listing all."""
    errors: list[str] = []
    d = cfg.dims
    for name, val in (("dims.n_dft", d.n_dft), ("dims.n_t", d.n_t), ("dims.n_r", d.n_r)):
        if not isinstance(val, int) or val < 1:
            errors.append(f"{name}: must be a positive integer, got {val!r}")
    for name, rho in (("correlation.rho_tx", cfg.correlation.rho_tx),
                      ("correlation.rho_rx", cfg.correlation.rho_rx)):
        if not isinstance(rho, (int, float)) or not 0.0 <= rho < 1.0:
            errors.append(f"{name}: must be in [0, 1), got {rho!r}")

    r = cfg.recovery
    if not isinstance(r.kappa, int) or r.kappa < 1:
        errors.append(f"recovery.kappa: must be a positive integer, got {r.kappa!r}")
    if not isinstance(r.tau, (int, float)) or not 0.0 < r.tau < 1.0:
        errors.append(f"recovery.tau: must be in (0, 1), got {r.tau!r}")
    if not isinstance(r.i_max, int) or r.i_max < 1:
        errors.append(f"recovery.i_max: must be >= 1, got {r.i_max!r}")
    if r.algorithm not in ALGORITHMS:
        errors.append(
            f"recovery.algorithm: must be one of {list(ALGORITHMS)}, got {r.algorithm!r}"
        )

    s = cfg.sounding
    if not isinstance(s.seed, int) or not 1 <= s.seed <= 0xFFFF:
        errors.append(
            f"sounding.seed: must be a nonzero 16-bit integer (1..65535), got {s.seed!r}"
        )
    n_usable = d.n_dft if s.usable_tones is None else len(set(s.usable_tones))
    if s.usable_tones is not None:
        bad = [t for t in s.usable_tones if not 0 <= t < d.n_dft]
        if bad:
            errors.append(
                f"sounding.usable_tones: indices {bad} outside [0, {d.n_dft})"
            )
        elif n_usable < d.n_t:
            errors.append(
                f"sounding.usable_tones: {n_usable} tones cannot cover {d.n_t} antennas"
            )
    available = n_usable * d.n_r
    if not isinstance(s.n_kappa, int) or s.n_kappa < 1:
        errors.append(f"sounding.n_kappa: must be a positive integer, got {s.n_kappa!r}")
    elif isinstance(r.kappa, int) and s.n_kappa < 2 * r.kappa:
        errors.append(
            f"sounding.n_kappa: must be >= 2*recovery.kappa = {2 * r.kappa}, got {s.n_kappa!r}"
        )
    elif s.n_kappa > available:
        errors.append(
            f"sounding.n_kappa: only {available} measurements available "
            f"({n_usable} tones x {d.n_r} rx), got {s.n_kappa!r}"
        )
    if s.snr_db is not None and not isinstance(s.snr_db, (int, float)):
        errors.append(f"sounding.snr_db: must be a number or null, got {s.snr_db!r}")
    if s.power_mode not in POWER_MODES:
        errors.append(
            f"sounding.power_mode: must be one of {list(POWER_MODES)}, got {s.power_mode!r}"
        )
    if s.threshold_db is not None and (
            not isinstance(s.threshold_db, (int, float)) or not s.threshold_db > 0):
        errors.append(
            f"sounding.threshold_db: must be positive or null, got {s.threshold_db!r}"
        )

    f = cfg.feedback
    if f.mode not in FEEDBACK_MODES:
        errors.append(f"feedback.mode: must be one of {list(FEEDBACK_MODES)}, got {f.mode!r}")
    if f.quant_bits is not None and (not isinstance(f.quant_bits, int) or f.quant_bits < 1):
        errors.append(f"feedback.quant_bits: must be a positive integer or null, got {f.quant_bits!r}")
    if not isinstance(f.n_tones, int) or f.n_tones < 0:
        errors.append(f"feedback.n_tones: must be >= 0, got {f.n_tones!r}")
    if not isinstance(f.ltf_duration_us, (int, float)) or not f.ltf_duration_us > 0:
        errors.append(f"feedback.ltf_duration_us: must be positive, got {f.ltf_duration_us!r}")

    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        errors.append(f"trials: must be a positive integer, got {cfg.trials!r}")
    if not isinstance(cfg.master_seed, int) or cfg.master_seed < 0:
        errors.append(f"master_seed: must be a non-negative integer, got {cfg.master_seed!r}")

    if not errors:
        try:
            pdp = cfg.resolve_pdp(base_dir)
            bins = bin_pdp(pdp)
            if bins[-1][0] >= d.n_dft:
                errors.append(
                    f"pdp: binned delay span {bins[-1][0]} does not fit in "
                    f"dims.n_dft = {d.n_dft}"
                )
        except ConfigError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError("; ".join(errors))


def load_config(path: str) -> tuple[ExperimentConfig, PdpSpec]:
    """Parse and fully validate a config file; returns (config, pdp).

    JSON is tried first (PyYAML reads scientific-notation floats like 1e-06
    as strings, so JSON input must get real JSON semantics), then YAML.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(
                f"config file {path!r} is not valid YAML/JSON: {exc}"
            ) from exc
    cfg = config_from_dict(data)
    base_dir = os.path.dirname(os.path.abspath(path))
    validate_config(cfg, base_dir)
    return cfg, cfg.resolve_pdp(base_dir)
