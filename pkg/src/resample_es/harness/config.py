"""Experiment configuration: an INI file with four flat sections.

    [problem]     d, p, z, noise, optimum
    [strategy]    mu, lambda, Y, budget, sigma0, tau, init
    [experiment]  runs, seed, Y_sweep, output_dir, jobs
    [probe]       gamma, trials, iterations, state_source, alpha,
                  alpha_prime, C, V, delta0, trace

Values given on the command line (``--set section.key=value``) override
the file. Every violation is collected before :class:`ConfigError` is
raised, so one invocation reports all of them.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from ..exceptions import ConfigError, InvalidParameterError
from ..problem import NOISE_KINDS, ProblemSpec
from ..probe import ProbeConfig
from ..strategy import StrategyConfig

__all__ = [
    "ExperimentConfig",
    "REFERENCE_Y_SWEEP",
    "SECTIONS",
    "load_config",
    "parse_config",
    "parse_overrides",
]

SECTIONS = {
    "problem": ("d", "p", "z", "noise", "optimum"),
    "strategy": ("mu", "lambda", "Y", "budget", "sigma0", "tau", "init"),
    "experiment": ("runs", "seed", "Y_sweep", "output_dir", "jobs"),
    "probe": ("gamma", "trials", "iterations", "state_source", "alpha", "alpha_prime",
              "C", "V", "delta0", "trace"),
}

REFERENCE_Y_SWEEP = (1, 2, 4, 8, 12, 16, 20, 24)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=lambda: ProblemSpec(d=15, p=2, z=2.1))
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    runs: int = 50
    seed: int = 0
    Y_sweep: tuple[int, ...] | None = None
    output_dir: str | None = None
    jobs: int | None = None
    probe: ProbeConfig | None = None
    probe_trace: str | None = None

    @property
    def Y_values(self) -> tuple[int, ...]:
        return self.Y_sweep if self.Y_sweep else (self.strategy.Y,)

    def strategy_for(self, Y: int) -> StrategyConfig:
        return replace(self.strategy, Y=int(Y))

    def to_sections(self) -> dict[str, dict[str, str]]:
        pr, st = self.problem, self.strategy
        noise = pr.noise if pr.noise != "uniform" else f"uniform:{pr.noise_scale!r}"
        out = {
            "problem": {"d": str(pr.d), "p": str(pr.p), "z": repr(pr.z), "noise": noise},
            "strategy": {
                "mu": str(st.mu), "lambda": str(st.lam), "Y": str(st.Y),
                "budget": str(st.budget),
                "init": "unit-vector" if st.x0 is None else _join(st.x0),
            },
            "experiment": {"runs": str(self.runs), "seed": str(self.seed)},
        }
        if pr.optimum is not None:
            out["problem"]["optimum"] = _join(pr.optimum)
        if st.sigma0 is not None:
            out["strategy"]["sigma0"] = repr(st.sigma0)
        if st.tau is not None:
            out["strategy"]["tau"] = repr(st.tau)
        if self.Y_sweep:
            out["experiment"]["Y_sweep"] = ",".join(str(y) for y in self.Y_sweep)
        if self.output_dir is not None:
            out["experiment"]["output_dir"] = self.output_dir
        if self.jobs is not None:
            out["experiment"]["jobs"] = str(self.jobs)
        if self.probe is not None:
            pc = self.probe
            sec = {
                "trials": str(pc.trials),
                "iterations": ",".join(str(n) for n in pc.iterations),
                "state_source": pc.state_source,
                "alpha": repr(pc.alpha), "C": repr(pc.C), "V": repr(pc.V),
                "delta0": repr(pc.delta0),
            }
            if pc.gamma is not None:
                sec["gamma"] = repr(pc.gamma)
            if pc.alpha_prime is not None:
                sec["alpha_prime"] = repr(pc.alpha_prime)
            if self.probe_trace is not None:
                sec["trace"] = self.probe_trace
            out["probe"] = sec
        return out

    def to_ini(self) -> str:
        cp = _parser()
        for name, sec in self.to_sections().items():
            cp[name] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _join(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as Y and C are case-sensitive
    return cp


class _Reader:
    """Typed access to raw section values, collecting violations."""

    def __init__(self, sections):
        self.sections = sections
        self.violations = []

    def get(self, section, key, convert, default=None):
        raw = self.sections.get(section, {}).get(key)
        if raw is None or str(raw).strip() == "":
            return default
        try:
            return convert(str(raw).strip())
        except (TypeError, ValueError) as exc:
            self.violations.append(f"{section}.{key}: cannot parse {raw!r} ({exc})")
            return default


def _int(s):
    try:
        return int(s)  # exact, also for 64-bit seeds
    except ValueError:
        pass
    v = float(s)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _floats(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s):
    return tuple(_int(v) for v in s.split(",") if v.strip())


def parse_overrides(items) -> dict[str, dict[str, str]]:
    """Turn ``section.key=value`` strings into a section mapping."""
    out: dict[str, dict[str, str]] = {}
    bad = []
    for item in items or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            bad.append(f"override {item!r} is not of the form section.key=value")
            continue
        out.setdefault(section, {})[name] = value.strip()
    if bad:
        raise ConfigError(bad)
    return out


def _merge(base, overrides):
    merged = {k: dict(v) for k, v in base.items()}
    for section, values in overrides.items():
        merged.setdefault(section, {}).update(values)
    return merged


def parse_config(sections, overrides=None) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from raw sections."""
    sections = _merge(sections, overrides or {})
    violations = []
    for section, values in sections.items():
        if section not in SECTIONS:
            violations.append(f"unknown section [{section}]")
            continue
        for key in values:
            if key not in SECTIONS[section]:
                violations.append(f"unknown key {section}.{key}")

    r = _Reader(sections)
    d = r.get("problem", "d", _int, 15)
    p = r.get("problem", "p", _int, 2)
    z = r.get("problem", "z", float, 2.1)
    noise_raw = r.get("problem", "noise", str, "gaussian")
    noise, noise_scale = noise_raw, 1.0
    if noise_raw.startswith("uniform:"):
        noise = "uniform"
        noise_scale = r.get("problem", "noise", lambda s: float(s.split(":", 1)[1]), 1.0)
    if noise not in NOISE_KINDS:
        violations.append(f"problem.noise: must be one of {NOISE_KINDS} (uniform:<a> allowed)")
        noise = "gaussian"
    optimum = r.get("problem", "optimum", _floats)

    mu = r.get("strategy", "mu", _int, 2)
    lam = r.get("strategy", "lambda", _int, 4)
    Y = r.get("strategy", "Y", _int, 12)
    budget = r.get("strategy", "budget", _int, 500_000)
    sigma0 = r.get("strategy", "sigma0", float)
    tau = r.get("strategy", "tau", float)
    init = r.get("strategy", "init", str, "unit-vector")
    x0 = None if init == "unit-vector" else r.get("strategy", "init", _floats)

    runs = r.get("experiment", "runs", _int, 50)
    seed = r.get("experiment", "seed", _int, 0)
    Y_sweep = r.get("experiment", "Y_sweep", _ints)
    output_dir = r.get("experiment", "output_dir", str)
    jobs = r.get("experiment", "jobs", _int)
    violations.extend(r.violations)

    problem = strategy = probe = None
    try:
        problem = ProblemSpec(d=d, p=p, z=z, noise=noise, noise_scale=noise_scale,
                              optimum=optimum)
    except (InvalidParameterError, ValueError) as exc:
        violations.append(f"problem: {exc}")
    if x0 is not None and len(x0) != d:
        violations.append(f"strategy.init: {len(x0)} coordinates for dimension {d}")
        x0 = None
    try:
        strategy = StrategyConfig(mu=mu, lam=lam, Y=Y, budget=budget, sigma0=sigma0,
                                  tau=tau, x0=x0)
    except (InvalidParameterError, ValueError) as exc:
        violations.append(f"strategy: {exc}")
    if runs < 1:
        violations.append(f"experiment.runs must be >= 1, got {runs}")
    if not 0 <= seed < 2**64:
        violations.append(f"experiment.seed must be a 64-bit unsigned integer, got {seed}")
    if Y_sweep is not None:
        if not Y_sweep or any(y < 1 for y in Y_sweep):
            violations.append(f"experiment.Y_sweep entries must be >= 1, got {Y_sweep}")
        elif strategy is not None:
            for y in Y_sweep:
                if strategy.budget < strategy.lam * y:
                    violations.append(
                        f"experiment.Y_sweep: budget {strategy.budget} cannot pay for Y={y}")
    if jobs is not None and jobs < 1:
        violations.append(f"experiment.jobs must be >= 1, got {jobs}")

    probe_trace = None
    if "probe" in sections:
        rp = _Reader(sections)
        kwargs = dict(
            gamma=rp.get("probe", "gamma", float),
            trials=rp.get("probe", "trials", _int, 100_000),
            iterations=rp.get("probe", "iterations", _ints, (10, 20, 40, 80)),
            state_source=rp.get("probe", "state_source", str, "synthetic"),
            alpha=rp.get("probe", "alpha", float, 0.05),
            alpha_prime=rp.get("probe", "alpha_prime", float),
            C=rp.get("probe", "C", float, 1.0),
            V=rp.get("probe", "V", float, 1.0),
            delta0=rp.get("probe", "delta0", float, 1.0),
        )
        probe_trace = rp.get("probe", "trace", str)
        violations.extend(rp.violations)
        try:
            probe = ProbeConfig(**kwargs)
        except (InvalidParameterError, ValueError) as exc:
            violations.append(f"probe: {exc}")
        if probe is not None and probe.state_source == "replay" and probe_trace is None:
            violations.append("probe.trace is required when state_source = replay")

    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(problem=problem, strategy=strategy, runs=runs, seed=seed,
                            Y_sweep=Y_sweep, output_dir=output_dir, jobs=jobs,
                            probe=probe, probe_trace=probe_trace)


def read_sections(path) -> dict[str, dict[str, str]]:
    cp = _parser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return {name: dict(cp[name]) for name in cp.sections()}


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read ``path`` (if any) and apply ``overrides``."""
    sections = read_sections(path) if path else {}
    return parse_config(sections, overrides)
