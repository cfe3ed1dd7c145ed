"""Experiment configuration: a flat TOML file mapped onto dataclasses.

Schema (all sections optional unless a subcommand needs them; see README for
the full key list):

    seed = 42

    [system]
    family = "pwa"              # pwa | double_integrator | generic
    xbar_threshold = 3500.0     # pwa; "inf" for the unthresholded variant
    ubar = 1.0                  # pwa
    sigma_w = 0.31622776601684  # pwa / double_integrator
    ubar1 = 0.5                 # double_integrator
    ubar2 = 1.0                 # double_integrator
    inner_policy = "feedback"   # double_integrator: feedback | zero

    [noise.process]             # generic family; overrides for built-ins
    kind = "gauss"              # gauss | uniform
    sigma = 1.0                 # or b = ... for uniform
    dim = 1

    [estimator]
    gamma = 1e-4

    [excitation]
    region = "auto"             # auto | all | halfline
    halfline_upper = 3150.0
    source = "closed-form"      # closed-form | explicit
    c_pe = 0.0126               # with source = "explicit"
    p_pe = 0.033

    [run]
    T = 20000
    num_paths = 100
    delta = 0.4
    x0 = [1.0]
    out_dir = "results"
    workers = 1

    [conventions]
    burn_in = "definition"      # definition | proof
    verify_horizon = 1000000
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from math import inf
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .excitation import (
    ExcitationCertificate,
    all_space,
    certificate_from_moments,
    double_integrator_certificate,
    half_line,
    pwa_moment_certificate,
)
from .noise import GAUSSIAN, UNIFORM, NoiseModel
from .systems import SystemSpec, double_integrator_spec, pwa_spec

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "default_example1_config",
           "default_example2_config"]

OUT_DIR_ENV = "REXID_OUT_DIR"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass
class SystemBlock:
    family: str = "pwa"
    # pwa / double_integrator parameters
    xbar_threshold: float = 3500.0
    ubar: float = 1.0
    sigma_w: float | None = None
    ubar1: float = 0.5
    ubar2: float = 1.0
    inner_policy: str = "feedback"
    # generic polynomial family (requires explicit noise blocks)
    n: int = 1
    m: int = 1
    d: int = 1
    theta_star: list | None = None
    u_clip: float = 0.0
    feedback_gain: list | None = None
    f_terms: list = field(default_factory=list)
    psi_terms: list = field(default_factory=list)
    growth: dict = field(default_factory=dict)


@dataclass
class EstimatorBlock:
    gamma: float = 1e-4
    vartheta0: list | None = None


@dataclass
class ExcitationBlock:
    region: str = "auto"
    halfline_upper: float | None = None
    source: str = "closed-form"
    c_pe: float | None = None
    p_pe: float | None = None
    mc_states: int = 5
    mc_directions: int = 64
    mc_params: int = 3
    mc_samples: int = 10_000
    slack: float = 0.05


@dataclass
class RunBlock:
    T: int = 20000
    num_paths: int = 100
    delta: float = 0.4
    x0: list = field(default_factory=lambda: [1.0])
    out_dir: str = "results"
    workers: int = 1


@dataclass
class ConventionsBlock:
    burn_in: str = "definition"
    verify_horizon: int = 1_000_000


@dataclass
class ExperimentConfig:
    seed: int = 0
    system: SystemBlock = field(default_factory=SystemBlock)
    estimator: EstimatorBlock = field(default_factory=EstimatorBlock)
    excitation: ExcitationBlock = field(default_factory=ExcitationBlock)
    run: RunBlock = field(default_factory=RunBlock)
    conventions: ConventionsBlock = field(default_factory=ConventionsBlock)
    noise: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 0.0 < self.run.delta < 1.0:
            raise ConfigError("delta must be in (0,1)")
        if self.run.num_paths < 1:
            raise ConfigError("num_paths must be >= 1")
        if self.run.T < 1:
            raise ConfigError("T must be >= 1")
        if self.conventions.burn_in not in ("definition", "proof"):
            raise ConfigError("conventions.burn_in must be 'definition' or 'proof'")
        if self.system.family not in ("pwa", "double_integrator", "generic"):
            raise ConfigError(f"unknown system family {self.system.family!r}")

    def resolve_out_dir(self, override: str | None = None) -> Path:
        out = override or os.environ.get(OUT_DIR_ENV) or self.run.out_dir
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        if not os.access(path, os.W_OK):
            raise ConfigError(f"output directory {path} is not writable")
        return path

    def build_spec(self) -> SystemSpec:
        sysb = self.system
        if sysb.family == "pwa":
            sigma_w = sysb.sigma_w if sysb.sigma_w is not None else float(np.sqrt(0.1))
            return pwa_spec(xbar_threshold=sysb.xbar_threshold, ubar=sysb.ubar,
                            sigma_w=sigma_w, gamma=self.estimator.gamma,
                            vartheta0=self._vartheta0())
        if sysb.family == "double_integrator":
            sigma_w = sysb.sigma_w if sysb.sigma_w is not None else 1.0
            return double_integrator_spec(sigma_w=sigma_w, ubar1=sysb.ubar1,
                                          ubar2=sysb.ubar2, gamma=self.estimator.gamma,
                                          inner_policy=sysb.inner_policy,
                                          vartheta0=self._vartheta0())
        if sysb.family == "generic":
            return self._build_generic_spec()
        raise ConfigError(f"unknown system family {sysb.family!r}")

    def _build_generic_spec(self) -> SystemSpec:
        from .growth import GrowthFn
        from .systems import GrowthCertificate, PolynomialMap, PolyTerm, generic_spec

        sysb = self.system
        proc = self.noise.get("process")
        expl = self.noise.get("exploratory")
        if not proc or not expl:
            raise ConfigError("generic family needs noise.process and noise.exploratory")
        if sysb.theta_star is None:
            raise ConfigError("generic family needs system.theta_star")
        if not sysb.growth:
            raise ConfigError("generic family needs a system.growth block")

        def poly(rows: list, out_dim: int, what: str) -> PolynomialMap:
            terms = []
            for row in rows:
                try:
                    terms.append(PolyTerm(
                        out_index=int(row["out"]),
                        coeff=float(row["coeff"]),
                        x_powers=tuple(int(p) for p in row.get("x_powers",
                                                               [0] * sysb.n)),
                        u_powers=tuple(int(p) for p in row.get("u_powers",
                                                               [0] * sysb.m)),
                        gate_index=int(row.get("gate_index", -1)),
                        gate_threshold=float(row.get("gate_threshold", 0.0)),
                    ))
                except (KeyError, TypeError) as exc:
                    raise ConfigError(f"bad {what} term {row!r}: {exc}") from exc
            return PolynomialMap(out_dim, sysb.n, sysb.m, tuple(terms))

        g = sysb.growth
        try:
            growth = GrowthCertificate(
                chi1=GrowthFn.from_dict(g["chi1"]), chi2=GrowthFn.from_dict(g["chi2"]),
                chi3=GrowthFn.from_dict(g["chi3"]), chi4=GrowthFn.from_dict(g["chi4"]),
                chi5=GrowthFn.from_dict(g["chi5"]),
                sigma1=GrowthFn.from_dict(g["sigma1"]),
                sigma2=GrowthFn.from_dict(g["sigma2"]),
                c1=float(g.get("c1", 0.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"growth block missing {exc}") from exc
        return generic_spec(
            n=sysb.n, m=sysb.m, d=sysb.d,
            f_map=poly(sysb.f_terms, sysb.n, "f"),
            psi_map=poly(sysb.psi_terms, sysb.d, "psi"),
            theta_star=np.asarray(sysb.theta_star, dtype=float),
            gamma=self.estimator.gamma,
            process_noise=_noise_model(proc, "noise.process"),
            exploratory_noise=_noise_model(expl, "noise.exploratory"),
            growth=growth,
            feedback_gain=sysb.feedback_gain,
            u_clip=sysb.u_clip,
            vartheta0=self._vartheta0(),
        )

    def _vartheta0(self):
        if self.estimator.vartheta0 is None:
            return None
        return np.asarray(self.estimator.vartheta0, dtype=float)

    def build_certificate(self, spec: SystemSpec) -> ExcitationCertificate:
        exb = self.excitation
        if exb.region == "all":
            region = all_space()
        elif exb.region == "halfline":
            if exb.halfline_upper is None:
                raise ConfigError("halfline region requires excitation.halfline_upper")
            region = half_line(exb.halfline_upper)
        elif exb.region == "auto":
            if spec.family == "pwa":
                thr = spec.params["xbar_threshold"]
                region = all_space() if thr == inf else half_line(0.9 * thr)
            else:
                region = all_space()
        else:
            raise ConfigError(f"unknown region kind {exb.region!r}")

        if exb.source == "explicit":
            if exb.c_pe is None or exb.p_pe is None:
                raise ConfigError("explicit certificates need c_pe and p_pe")
            return ExcitationCertificate(region=region, c_pe=exb.c_pe, p_pe=exb.p_pe,
                                         provenance="explicit")
        if exb.source != "closed-form":
            raise ConfigError(f"unknown certificate source {exb.source!r}")
        if spec.family == "pwa":
            mc = pwa_moment_certificate(spec.params["xbar_threshold"],
                                        spec.params["sigma_w"], spec.params["ubar"])
        elif spec.family == "double_integrator":
            mc = double_integrator_certificate(spec.params["sigma_w"],
                                               spec.params["ubar1"],
                                               spec.params["ubar2"])
        else:
            raise ConfigError("closed-form certificates exist only for built-in families")
        return certificate_from_moments(mc, region)


def _coerce(block_cls, data: dict, path: str):
    kwargs = {}
    fields = {f for f in block_cls.__dataclass_fields__}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key {path}.{key}")
        if key == "xbar_threshold" and isinstance(value, str):
            if value.lower() in ("inf", "infinity"):
                value = inf
            else:
                raise ConfigError(f"{path}.{key}: expected a number or 'inf'")
        kwargs[key] = value
    return block_cls(**kwargs)


def parse_config(data: dict) -> ExperimentConfig:
    known = {"seed", "system", "estimator", "excitation", "run", "conventions", "noise"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown top-level key {key!r}")
    cfg = ExperimentConfig(
        seed=int(data.get("seed", 0)),
        system=_coerce(SystemBlock, data.get("system", {}), "system"),
        estimator=_coerce(EstimatorBlock, data.get("estimator", {}), "estimator"),
        excitation=_coerce(ExcitationBlock, data.get("excitation", {}), "excitation"),
        run=_coerce(RunBlock, data.get("run", {}), "run"),
        conventions=_coerce(ConventionsBlock, data.get("conventions", {}), "conventions"),
        noise=data.get("noise", {}),
    )
    if cfg.noise:
        _apply_noise_overrides(cfg)
    cfg.validate()
    return cfg


def _apply_noise_overrides(cfg: ExperimentConfig) -> None:
    if cfg.system.family == "generic":
        return  # generic specs consume the noise blocks directly
    proc = cfg.noise.get("process")
    if proc:
        model = _noise_model(proc, "noise.process")
        if model.kind != GAUSSIAN:
            raise ConfigError("built-in families use Gaussian process noise")
        cfg.system.sigma_w = model.scale
    expl = cfg.noise.get("exploratory")
    if expl:
        model = _noise_model(expl, "noise.exploratory")
        if model.kind != UNIFORM:
            raise ConfigError("built-in families use uniform exploratory noise")
        if cfg.system.family == "pwa":
            cfg.system.ubar = model.scale
        else:
            cfg.system.ubar2 = model.scale


def _noise_model(data: dict, path: str) -> NoiseModel:
    kind = data.get("kind")
    if kind == "gauss":
        return NoiseModel(GAUSSIAN, float(data["sigma"]), int(data.get("dim", 1)))
    if kind == "uniform":
        return NoiseModel(UNIFORM, float(data["b"]), int(data.get("dim", 1)))
    raise ConfigError(f"{path}.kind must be 'gauss' or 'uniform'")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parse_config(data)


def default_example1_config(xbar_threshold: float = 3500.0) -> ExperimentConfig:
    """Worked-example defaults: ubar=1, sigma_w^2=0.1, gamma=1e-4, x0=1,
    delta=0.4, 100 paths, T=20000."""
    cfg = ExperimentConfig()
    cfg.system = SystemBlock(family="pwa", xbar_threshold=xbar_threshold, ubar=1.0,
                             sigma_w=float(np.sqrt(0.1)))
    cfg.estimator = EstimatorBlock(gamma=1e-4)
    cfg.run = RunBlock(T=20000, num_paths=100, delta=0.4, x0=[1.0])
    cfg.seed = 101
    return cfg


def default_example2_config() -> ExperimentConfig:
    """Double-integrator defaults: sigma_w=1, ubar1=0.5, ubar2=1, gamma=1e-4,
    x0=(1,0), delta=0.4 (only positivity is dictated by the source)."""
    cfg = ExperimentConfig()
    cfg.system = SystemBlock(family="double_integrator", sigma_w=1.0,
                             ubar1=0.5, ubar2=1.0)
    cfg.estimator = EstimatorBlock(gamma=1e-4)
    cfg.run = RunBlock(T=2000, num_paths=100, delta=0.4, x0=[1.0, 0.0])
    cfg.seed = 20241
    return cfg
