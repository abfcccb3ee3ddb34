"""Scenario configurations and the built-in experiment library.

A scenario document (YAML or JSON) mirrors :class:`ScenarioConfig`.  Units
are part of the key names: ``*_dbm`` in dBm, ``d_*`` in meters,
``carrier_freq_hz`` in Hz, rate thresholds in bits/s/Hz.
"""

from dataclasses import asdict, dataclass
import copy
import json
import math
from pathlib import Path

import numpy as np
import yaml

from ..channel import Geometry, LinkBudget, noise_power_watts
from ..model import SystemParams
from ..units import dbm_to_watts

METHODS = ("wsrmax-digital", "wsrmax-analog", "tpmin", "baseline-random", "baseline-mrt")
SWEEP_PARAMS = ("p_t_dbm", "alpha", "r0_th", "xi")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario_id: str
    description: str = ""
    methods: tuple = ("wsrmax-digital",)
    num_antennas: int = 32
    num_users: int = 2
    alpha: float = 0.6
    eh_efficiency: float = 0.6
    eh_threshold_dbm: float = -60.0
    xi: float = 1.0
    weights: tuple = None
    # fixed thresholds (length K+1, tag first) or divisors d_k for log2(1 + p_t[W] / d_k)
    rate_thresholds: tuple = None
    threshold_divisors: tuple = None
    p_t_dbm: float = 20.0
    max_power_dbm: float = 30.0
    d_h: tuple = (12.0, 12.0)
    d_f: float = 5.0
    d_q: tuple = (8.0, 10.0)
    carrier_freq_hz: float = 3e9
    path_loss: str = "nlos"
    shadowing_std_db: float = 0.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 10.0
    baseline_rho1: float = 0.3
    sweep_param: str = "p_t_dbm"
    sweep_values: tuple = (20.0,)
    series_param: str = None
    series_values: tuple = ()
    trials: int = 200
    base_seed: int = 2024
    trace: bool = False

    def __post_init__(self):
        for name in ("methods", "weights", "rate_thresholds", "threshold_divisors", "d_h", "d_q",
                     "sweep_values", "series_values"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, tuple(val))
        self.validate()

    def validate(self):
        if not self.sweep_values:
            raise ConfigError("sweep grid must be nonempty")
        if list(self.sweep_values) != sorted(self.sweep_values):
            raise ConfigError("sweep grid must be sorted")
        if self.series_values and list(self.series_values) != sorted(self.series_values):
            raise ConfigError("series grid must be sorted")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        for p in (self.sweep_param, self.series_param):
            if p is not None and p not in SWEEP_PARAMS:
                raise ConfigError(f"cannot sweep {p!r}; choose from {SWEEP_PARAMS}")
        if self.rate_thresholds is None and self.threshold_divisors is None:
            raise ConfigError("give rate_thresholds or threshold_divisors")
        K = self.num_users
        if len(self.d_h) != K or len(self.d_q) != K:
            raise ConfigError("d_h and d_q need one entry per user")
        n = len(self.rate_thresholds if self.rate_thresholds is not None else self.threshold_divisors)
        if n != K + 1:
            raise ConfigError("thresholds need K+1 entries (tag first)")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")

    # -- derived objects -------------------------------------------------

    def point(self, sweep_value, series_value=None):
        """Copy of the config with the sweep (and series) parameter applied."""
        cfg = copy.copy(self)
        _apply(cfg, self.sweep_param, sweep_value)
        if self.series_param is not None and series_value is not None:
            _apply(cfg, self.series_param, series_value)
        return cfg

    def system_params(self):
        K = self.num_users
        p_t = float(dbm_to_watts(self.p_t_dbm))
        if self.rate_thresholds is not None:
            r = np.array(self.rate_thresholds, dtype=float)
        else:
            r = np.log2(1.0 + p_t / np.array(self.threshold_divisors, dtype=float))
        w = np.full(K + 1, 1.0 / (K + 1)) if self.weights is None else np.array(self.weights, dtype=float)
        budget = LinkBudget(self.noise_psd_dbm_hz, self.bandwidth_hz, self.noise_figure_db)
        return SystemParams(
            num_antennas=self.num_antennas,
            num_users=K,
            reflection_coeff=self.alpha,
            eh_efficiency=self.eh_efficiency,
            eh_threshold=float(dbm_to_watts(self.eh_threshold_dbm)) if math.isfinite(self.eh_threshold_dbm) else 0.0,
            noise_power=noise_power_watts(budget),
            sic_quality=np.full(K, self.xi),
            weights=w,
            rate_thresholds=r,
            max_power=float(dbm_to_watts(self.max_power_dbm)),
        )

    def geometry(self):
        return Geometry(self.d_h, self.d_f, self.d_q, self.carrier_freq_hz)

    @property
    def p_t(self):
        return float(dbm_to_watts(self.p_t_dbm))

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def _apply(cfg, name, value):
    value = float(value)
    if name == "r0_th":
        if cfg.rate_thresholds is None:
            raise ConfigError("r0_th sweep needs fixed rate_thresholds")
        cfg.rate_thresholds = (value,) + tuple(cfg.rate_thresholds[1:])
    else:
        setattr(cfg, name, value)


# ----------------------------------------------------------------------------
# built-ins

WSR_BASE = dict(num_users=2, d_h=(12.0, 12.0), d_f=5.0, d_q=(8.0, 10.0), alpha=0.6,
                threshold_divisors=(100.0, 1.0, 10.0), p_t_dbm=20.0)
TP_BASE = dict(num_users=3, d_h=(10.0, 10.0, 10.0), d_f=3.0, d_q=(8.0, 9.0, 10.0), alpha=0.5,
               rate_thresholds=(0.3, 2.0, 1.0, 0.5), methods=("tpmin",))
ALL_WSR = ("wsrmax-digital", "wsrmax-analog", "baseline-mrt", "baseline-random")

BUILTINS = {
    "fig3": dict(WSR_BASE, description="tag harvested power / rate trade-off over alpha at 20 dBm",
                 methods=ALL_WSR, sweep_param="alpha",
                 sweep_values=(0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)),
    "fig4": dict(WSR_BASE, description="user rates versus transmit power",
                 methods=ALL_WSR, sweep_values=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)),
    "fig5": dict(WSR_BASE, description="tag rate (exact and lower bound) versus transmit power",
                 methods=ALL_WSR, sweep_values=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)),
    "fig6": dict(TP_BASE, description="minimum transmit power versus tag rate target",
                 sweep_param="r0_th", sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5),
                 series_param="alpha", series_values=(0.3, 0.5, 0.7)),
    "fig7": dict(TP_BASE, description="user rates at the power-minimizing design versus tag target",
                 sweep_param="r0_th", sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5),
                 series_param="alpha", series_values=(0.3, 0.5, 0.7)),
    "fig8": dict(TP_BASE, description="tag rate at the power-minimizing design versus tag target",
                 sweep_param="r0_th", sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5),
                 series_param="alpha", series_values=(0.3, 0.5, 0.7)),
    "fig9": dict(WSR_BASE, description="weighted sum rate versus SIC quality at 20 dBm",
                 methods=("wsrmax-digital", "baseline-mrt"), sweep_param="xi",
                 sweep_values=(0.6, 0.7, 0.8, 0.9, 1.0), series_param="alpha", series_values=(0.3, 0.5, 0.7)),
    "fig10": dict(TP_BASE, description="minimum transmit power versus SIC quality",
                  num_users=2, d_h=(10.0, 10.0), d_q=(8.0, 9.0), rate_thresholds=(0.5, 3.0, 1.0),
                  sweep_param="xi", sweep_values=(0.6, 0.7, 0.8, 0.9, 1.0),
                  series_param="alpha", series_values=(0.3, 0.5, 0.7)),
    "fig11": dict(WSR_BASE, description="WSRMax convergence traces", methods=("wsrmax-digital",),
                  sweep_values=(10.0, 15.0, 20.0), trace=True, trials=1),
    "fig12": dict(TP_BASE, description="TPMin convergence traces", sweep_param="r0_th",
                  sweep_values=(0.1, 0.3, 0.5), trace=True, trials=1),
}


def list_scenarios():
    return {k: v["description"] for k, v in BUILTINS.items()}


def builtin(scenario_id, **overrides):
    if scenario_id not in BUILTINS:
        raise ConfigError(f"unknown scenario {scenario_id!r}; known: {sorted(BUILTINS)}")
    opts = dict(BUILTINS[scenario_id])
    opts.update(overrides)
    return ScenarioConfig(scenario_id=scenario_id, **opts)


def load_config(path_or_id, **overrides):
    """Built-in id, or a YAML/JSON document (optionally ``base: <builtin id>``)."""
    p = Path(str(path_or_id))
    if not p.suffix and str(path_or_id) in BUILTINS:
        return builtin(str(path_or_id), **overrides)
    if not p.exists():
        raise ConfigError(f"no built-in scenario or file named {path_or_id!r}")
    try:
        text = p.read_text()
        doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p} must hold a mapping")
    doc = dict(doc)
    base = doc.pop("base", None)
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {p}: {sorted(unknown)}")
    doc.update(overrides)
    try:
        if base is not None:
            sid = doc.pop("scenario_id", None) or p.stem
            cfg = builtin(base, **doc)
            cfg.scenario_id = str(sid)
            return cfg
        doc.setdefault("scenario_id", p.stem)
        return ScenarioConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
