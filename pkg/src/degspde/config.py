"""
Plain ``key = value`` run configuration.

One key per line, ``#`` starts a comment, blank lines are ignored.  Every key
has a type and a default (see :data:`SCHEMA`); unknown keys, malformed values
and duplicated keys are errors that name the key and the line.  When a file is
given it must set the model and discretisation keys in :data:`REQUIRED`.
Command-line overrides (``key=value``) are applied after the file.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .experiments.monitors import MonitorConfig
from .solver import ModelParams, SolverConfig


class ConfigError(ValueError):
    pass


def _float(text: str) -> float:
    t = text.strip().lower()
    if t == "pi":
        return math.pi
    v = float(t)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _int(text: str) -> int:
    return int(text.strip())


def _floats(text: str) -> tuple:
    t = text.strip()
    return tuple(_float(v) for v in t.split(",")) if t else ()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return parse


def _field_spec(text: str) -> str:
    parse_field_spec(text)
    return text.strip()


def _str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    doc: str


SCHEMA: dict[str, Key] = {
    # model
    "alpha": Key(_float, "4", "noise degeneracy exponent, >= 2"),
    "beta": Key(_float, "1", "potential singularity exponent, >= 1"),
    "gamma": Key(_float, "6", "monitored energy exponent"),
    "delta": Key(_float, "0.45", "noise color exponent"),
    "sigma": Key(_float, "0.15", "noise regularity index"),
    "epsilon": Key(_float, "0.1", "regularisation, in (0, 1)"),
    "bc": Key(_choice("dirichlet", "neumann"), "dirichlet", "boundary condition"),
    "L": Key(_float, "pi", "domain length"),
    # discretisation
    "N": Key(_int, "32", "retained modes"),
    "dt": Key(_float, "0.001", "time step"),
    "T": Key(_float, "1", "horizon of simulate"),
    "seed": Key(_int, "0", "master seed"),
    "store_stride": Key(_int, "100", "steps between stored snapshots"),
    "drift_mode": Key(_choice("potential", "linear", "off"), "potential", "test mode of the drift"),
    "noise_mode": Key(_choice("full", "additive", "off"), "full", "test mode of the noise"),
    "linear_mode": Key(_choice("on", "off"), "on", "test mode of the operator A"),
    "clamp_mode": Key(_choice("none", "report_only"), "none", "report grid values beyond the barriers"),
    "newton_tol": Key(_float, "1e-14", "tolerance of the implicit potential step"),
    # ensemble and monitors
    "trajectories": Key(_int, "100", "ensemble size of simulate"),
    "chunk_size": Key(_int, "100", "trajectories per work unit (independent of threads)"),
    "x0": Key(_field_spec, "zero", "initial datum: zero | sine:AMP | parabola:AMP | mode:K:AMP"),
    "moments": Key(_floats, "2,4", "moment orders of ||X||_H"),
    "gammas": Key(_floats, "", "monitored exponents (empty: gamma)"),
    "sobolev": Key(_floats, "", "reported Sobolev indices (empty: sigma, delta)"),
    "monitor_stride": Key(_int, "100", "steps between monitor samples"),
    # bel
    "bel_t": Key(_float, "0.5", "time of the derivative"),
    "bel_dt": Key(_float, "0.0025", "time step of the derivative runs"),
    "bel_samples": Key(_int, "100000", "number of paired samples"),
    "bel_eta": Key(_float, "0.001", "finite-difference step"),
    "bel_observable": Key(_str, "smoothed_mass", "mode_projection(K) | smoothed_mass | bounded_sigmoid_of_H_norm"),
    "bel_h": Key(_field_spec, "mode:1:1", "direction of the derivative"),
    "bel_chunk": Key(_int, "10000", "samples per work unit"),
    # irreducibility
    "irr_t": Key(_float, "0.5", "final time"),
    "irr_tau": Key(_float, "0.4", "start of the extra drift"),
    "irr_gains": Key(_floats, "5,10", "gains M (0 adds the plain dynamics)"),
    "irr_r": Key(_float, "0.5", "target radius in V_{2 delta}"),
    "irr_target": Key(_field_spec, "parabola:0.5", "target state"),
    "irr_samples": Key(_int, "1000", "trajectories"),
    "irr_dt_free": Key(_float, "0.001", "time step on [0, tau]"),
    "irr_dt": Key(_float, "0.0001", "time step on [tau, t]"),
    "irr_test_mode": Key(_choice("none", "drift_only"), "none", "drift_only keeps only the extra drift"),
    "irr_rate_tol": Key(_float, "0.2", "allowed relative error of the fitted rate"),
    # ergodicity
    "erg_x1": Key(_field_spec, "zero", "start of chain 1"),
    "erg_x2": Key(_field_spec, "sine:0.9", "start of chain 2"),
    "erg_horizons": Key(_floats, "25,50,100,200", "horizon ladder"),
    "erg_burn_in": Key(_float, "5", "discarded initial time"),
    "erg_per_chain": Key(_int, "200", "trajectories per chain"),
    "erg_coupling": Key(_choice("synchronous", "independent"), "synchronous", "noise sharing between chains"),
    "erg_seed2": Key(_int, "-1", "seed of chain 2 (-1: same as seed)"),
    "erg_ks_max": Key(_float, "0.1", "bound on the final KS distances"),
    "erg_slope_max": Key(_float, "0.01", "bound on the log slope per doubling of the monitors"),
    # lemma suite and potential table
    "lemma_eps": Key(_floats, "0.2,0.05", "regularisations of the lemma suite"),
    "lemma_exponents": Key(_floats, "1,2,3", "exponents of the lemma suite"),
    "table_exponent": Key(_float, "2", "exponent of the dumped potential"),
    "table_points": Key(_int, "2001", "rows of the potential table"),
    "table_rmax": Key(_float, "1.2", "the table covers [-rmax, rmax]"),
}

REQUIRED = ("alpha", "beta", "delta", "sigma", "epsilon", "N", "dt", "T")


def parse_field_spec(text: str) -> tuple:
    """Split a field description such as ``sine:0.9`` into ``(kind, args...)``."""
    parts = [p.strip() for p in text.strip().split(":")]
    kind = parts[0]
    try:
        if kind == "zero" and len(parts) == 1:
            return ("zero",)
        if kind in ("sine", "parabola") and len(parts) == 2:
            return (kind, float(parts[1]))
        if kind == "mode" and len(parts) == 3:
            k = int(parts[1])
            if k < 1:
                raise ValueError
            return ("mode", k, float(parts[2]))
    except ValueError:
        pass
    raise ValueError("expected zero | sine:AMP | parabola:AMP | mode:K:AMP")


def build_field(text: str, basis) -> np.ndarray:
    """Coefficients of a field description on ``basis``.

    ``sine:A`` is the first eigenfunction scaled to sup-norm ``A``;
    ``parabola:A`` is ``A 4 x (L - x) / L^2``; ``mode:K:A`` sets coefficient
    ``K`` (1-based) to ``A``.
    """
    spec = parse_field_spec(text)
    n = basis.n_modes
    out = np.zeros(n)
    if spec[0] == "sine":
        peak = np.max(np.abs(basis.eigenfunctions(np.linspace(0, basis.domain_length, 4097))[:, 0]))
        out[0] = spec[1] / peak
    elif spec[0] == "parabola":
        g = basis.grid
        L = basis.domain_length
        out = g.analyze(spec[1] * 4.0 * g.nodes * (L - g.nodes) / (L * L))
    elif spec[0] == "mode":
        if spec[1] > n:
            raise ValueError(f"mode {spec[1]} exceeds N = {n}")
        out[spec[1] - 1] = spec[2]
    return out


@dataclass
class RunConfig:
    """Resolved values and where each came from (``default``, ``file:LINE`` or ``override``)."""

    values: dict
    sources: dict
    path: Optional[str] = None

    def __getitem__(self, key: str):
        return self.values[key]

    def model_params(self) -> ModelParams:
        v = self.values
        return ModelParams(
            alpha=v["alpha"], beta=v["beta"], gamma=v["gamma"], delta=v["delta"], sigma=v["sigma"],
            epsilon=v["epsilon"], bc=v["bc"], domain_length=v["L"],
        )

    def solver_config(self, **changes) -> SolverConfig:
        v = self.values
        kw = dict(
            n_modes=v["N"], dt=v["dt"], horizon=v["T"], seed=v["seed"], store_stride=v["store_stride"],
            clamp_mode=v["clamp_mode"], drift_mode=v["drift_mode"], noise_mode=v["noise_mode"],
            linear_mode=v["linear_mode"], newton_tol=v["newton_tol"],
        )
        kw.update(changes)
        return SolverConfig(**kw)

    def monitor_config(self) -> MonitorConfig:
        v = self.values
        return MonitorConfig(moments=v["moments"], gammas=v["gammas"], sobolev=v["sobolev"], stride=v["monitor_stride"])

    def resolved_text(self) -> str:
        lines = ["# resolved configuration (key = value  # source)"]
        for key in SCHEMA:
            lines.append(f"{key} = {self.raw[key]}  # {self.sources[key]}")
        return "\n".join(lines) + "\n"

    raw: dict = field(default_factory=dict)


def _assign(key: str, text: str, where: str, values: dict, raw: dict, sources: dict):
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r} ({where})")
    try:
        values[key] = SCHEMA[key].parse(text)
    except ValueError as exc:
        raise ConfigError(f"bad value {text.strip()!r} for key {key!r} ({where}): {exc}") from None
    raw[key] = text.strip()
    sources[key] = where


def _split(line: str, where: str) -> tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"expected key = value ({where}): {line.strip()!r}")
    key, text = line.split("=", 1)
    return key.strip(), text


def parse_config(path=None, overrides: Sequence[str] = (), warn: bool = True) -> RunConfig:
    """Resolve a configuration from an optional file and ``key=value`` overrides.

    Raises
    ------
    ConfigError
        Unknown key, malformed value, duplicated key, missing required key or
        an invalid parameter combination; the message names key and line.
    """
    values, raw, sources = {}, {}, {}
    for key, spec in SCHEMA.items():
        values[key] = spec.parse(spec.default)
        raw[key] = spec.default
        sources[key] = "default"
    seen = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            body = line.split("#", 1)[0]
            if not body.strip():
                continue
            where = f"{path}:{lineno}"
            key, text = _split(body, where)
            if key in seen:
                raise ConfigError(f"duplicate key {key!r} ({where}; first at line {seen[key]})")
            seen[key] = lineno
            _assign(key, text, where, values, raw, sources)
    for i, item in enumerate(overrides, start=1):
        where = f"override {i}"
        key, text = _split(item, where)
        _assign(key, text, where, values, raw, sources)
    if path is not None:
        missing = [k for k in REQUIRED if sources[k] == "default"]
        if missing:
            raise ConfigError(f"missing required key {missing[0]!r} in {path}")
    cfg = RunConfig(values, sources, None if path is None else str(path), raw)
    try:
        params = cfg.model_params()
        cfg.solver_config()
        cfg.monitor_config()
    except ValueError as exc:
        bad = _blame(str(exc))
        where = sources.get(bad, "?") if bad else "?"
        raise ConfigError(f"invalid configuration: {exc} (key {bad!r}, {where})") from None
    for key in ("trajectories", "chunk_size", "bel_samples", "bel_chunk", "irr_samples", "erg_per_chain", "table_points", "N"):
        if values[key] < 1:
            raise ConfigError(f"key {key!r} must be >= 1 ({sources[key]})")
    if warn:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            params.warn_regime()
    return cfg


def _blame(message: str) -> Optional[str]:
    aliases = {"n_modes": "N", "domain_length": "L", "store_stride": "store_stride", "stride": "monitor_stride", "moment": "moments"}
    for key in list(aliases) + list(SCHEMA):
        if message.startswith(key) or f" {key} " in f" {message} ":
            return aliases.get(key, key)
    return None
