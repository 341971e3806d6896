"""Configuration-driven experiment runner.

An experiment is one JSON document (validated against ``config.schema.json``)
naming an instance, a scheme, the moduli bindings and a list of checks. The
runner executes the checks in dependency order (trace, then Phi and mu,
then the Fejér checks, then the rates) and collects one entry per check in a
:class:`Report`. A check that raises is recorded with status ``error``; it
does not stop the remaining checks.

Checks run sequentially in one worker, so the memo tables of the moduli are
never shared across threads. Every random draw comes from
``counter_rng(seed, check_name)``, which keeps the report byte-identical for
a fixed config.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import geometry, iterations, moduli, rates
from ._random import counter_rng
from .iterations import SchemeDescriptor
from .moduli import ModulusError
from .rates import Counterfunction, RateInputs

CHECK_ORDER = (
    "regularity-discovery",
    "phi",
    "fejer-local",
    "fejer-uniform",
    "fejer-approx",
    "non-fejer-witness",
    "coincidence",
    "regularity-falsify",
    "cauchy-rate",
    "metastability",
    "reversal-regularity",
)

DEFAULT_MODULI = {
    "gh": "square",
    "A": "auto",
    "rho": "dykstra-uniform",
    "rho_approx": "dykstra-approx-rho",
    "chi": "dykstra-approx-chi",
    "mu": "discover",
    "phi": "empirical",
    "gamma": "box-ball",
    "tau": "coincidence",
}
DEFAULT_SAMPLES = {"p": 64, "p_approx": 64, "falsify": 100_000, "coincidence": 1000, "audit": 20_000}


class ConfigError(ValueError):
    """A config that cannot be run; ``field`` locates the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def load_schema() -> dict:
    return json.loads(resources.files("fejerlab").joinpath("config.schema.json").read_text())


def bundled_configs() -> list[str]:
    root = resources.files("fejerlab").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config_path(name: str) -> Path:
    path = Path(str(resources.files("fejerlab").joinpath("configs", f"{name}.json")))
    if not path.exists():
        raise ConfigError("config", f"no bundled config named {name!r}; known: {', '.join(bundled_configs())}")
    return path


# ---------------------------------------------------------------------------
# Config


@dataclass
class ExperimentConfig:
    name: str
    instance: geometry.ProblemInstance
    scheme: SchemeDescriptor
    horizon: int = 200
    moduli: dict = field(default_factory=lambda: dict(DEFAULT_MODULI))
    discovery: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    k_max: int = 10
    r_max: int = 10
    m_max: int = 8
    meta_k_max: int = 5
    counterfunctions: list = field(default_factory=lambda: ["n"])
    samples: dict = field(default_factory=lambda: dict(DEFAULT_SAMPLES))
    extra_p: list = field(default_factory=list)
    coincidence: dict = field(default_factory=dict)
    reversal: dict = field(default_factory=dict)
    ceiling: int = rates.DEFAULT_CEILING
    seed: int = 0
    output: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        try:
            jsonschema.validate(raw, load_schema())
        except jsonschema.ValidationError as e:
            where = ".".join(str(p) for p in e.absolute_path) or "config"
            raise ConfigError(where, e.message) from None
        try:
            inst = geometry.ProblemInstance.from_dict(raw["instance"])
        except (geometry.GeometryError, ValueError) as e:
            raise ConfigError("instance", str(e)) from None
        try:
            scheme = SchemeDescriptor.from_dict(raw.get("scheme", {"kind": "dykstra"}), inst)
        except (ValueError, KeyError) as e:
            raise ConfigError("scheme", str(e)) from None
        cfg = cls(
            name=raw.get("name", inst.name or "experiment"),
            instance=inst,
            scheme=scheme,
            horizon=raw.get("horizon", 200),
            moduli={**DEFAULT_MODULI, **raw.get("moduli", {})},
            discovery={"grid_step": 0.01, "ball_radius": None, "tail": "linear", "k_max": None,
                       **raw.get("discovery", {})},
            checks=list(raw.get("checks", [])),
            k_max=raw.get("k_max", 10),
            r_max=raw.get("r_max", 10),
            m_max=raw.get("m_max", 8),
            meta_k_max=raw.get("meta_k_max", 5),
            counterfunctions=list(raw.get("counterfunctions", ["n"])),
            samples={**DEFAULT_SAMPLES, **raw.get("samples", {})},
            extra_p=raw.get("extra_p", []),
            coincidence=raw.get("coincidence", {}),
            reversal=raw.get("reversal", {}),
            ceiling=int(raw.get("ceiling", rates.DEFAULT_CEILING)),
            seed=raw.get("seed", 0),
            output=raw.get("output"),
            raw=raw,
        )
        cfg._validate_bindings()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"{path} is not valid JSON ({e.msg} at line {e.lineno})") from None
        return cls.from_dict(raw)

    def _validate_bindings(self):
        m = self.moduli
        specials = {"mu": "discover", "phi": "empirical"}
        for key in ("rho", "rho_approx", "mu", "phi", "gamma"):
            if m[key] == specials.get(key):
                continue
            try:
                moduli.build_modulus(m[key], self.instance)
            except (ModulusError, OSError, KeyError) as e:
                raise ConfigError(f"moduli.{key}", str(e)) from None
        try:
            moduli.build_modulus3(m["chi"], self.instance)
        except ModulusError as e:
            raise ConfigError("moduli.chi", str(e)) from None
        try:
            moduli.build_gh(m["gh"])
        except ModulusError as e:
            raise ConfigError("moduli.gh", str(e)) from None
        tau_schemes = self.coincidence.get("schemes") or [self._fixed_point_kind()]
        for s in tau_schemes:
            try:
                moduli.build_modulus2(m["tau"], s)
            except ModulusError as e:
                raise ConfigError("moduli.tau", str(e)) from None
        for i, g in enumerate(self.counterfunctions):
            try:
                Counterfunction.parse(g)
            except ValueError as e:
                raise ConfigError(f"counterfunctions.{i}", str(e)) from None
        if m["A"] == "dykstra" and self.scheme.kind != "dykstra":
            raise ConfigError("moduli.A", "the Dykstra property needs the dykstra scheme")
        if "reversal-regularity" in self.checks and not (self.reversal or self.scheme.kind != "dykstra"):
            raise ConfigError("reversal", "reversal-regularity needs a fixed-point scheme or a reversal section")

    def _fixed_point_kind(self) -> str:
        return "km" if self.scheme.kind == "dykstra" else self.scheme.kind

    def echo(self) -> dict:
        """The config as run, with defaults filled in and without the output directory."""
        d = copy.deepcopy(self.raw)
        d.pop("output", None)
        d.update(name=self.name, horizon=self.horizon, moduli=self.moduli, discovery=self.discovery,
                 checks=self.checks, k_max=self.k_max, r_max=self.r_max, m_max=self.m_max,
                 meta_k_max=self.meta_k_max, counterfunctions=self.counterfunctions,
                 samples=self.samples, ceiling=str(self.ceiling), seed=self.seed)
        return d


# ---------------------------------------------------------------------------
# Report


@dataclass
class Report:
    config: dict
    trace: dict
    checks: dict
    timings: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)

    @property
    def status(self) -> str:
        states = {c["status"] for c in self.checks.values()}
        if not states or states == {"certified"}:
            return "certified"
        if "error" in states:
            return "error"
        if "violated" in states:
            return "violated"
        return "bound-overflow"

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "certified" else 1

    def to_dict(self) -> dict:
        """Everything except wall-clock timings, which live in ``timings.json``."""
        return {"status": self.status, "config": self.config, "trace": self.trace, "checks": self.checks}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "note"])
        for name, c in self.checks.items():
            w.writerow([name, c["status"], c.get("note", "")])
        return buf.getvalue()

    def rates_csv(self) -> str:
        """One row per rate evaluation: kind, counterfunction, k, bound, observed index."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "g", "k", "bound", "observed"])
        cauchy = self.checks.get("cauchy-rate", {}).get("certificate")
        if cauchy:
            for row in cauchy["details"].get("rows", []):
                first = "" if row["first_good"] is None else row["first_good"]
                w.writerow(["cauchy", "", row["k"], row["psi_2k_plus_1"], first])
        for cert in self.checks.get("metastability", {}).get("certificates", []):
            N = "" if not cert["witness"] else cert["witness"].get("N", "")
            w.writerow(["metastability", cert["inputs"]["g"], cert["k"],
                        "" if cert["bound"] is None else cert["bound"], N])
        return buf.getvalue()

    def write(self, out_dir, fmt: str | None = None) -> list[Path]:
        """Write ``report.json`` plus CSV and/or JSON side files; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def put(name, text):
            path = out / name
            path.write_text(text)
            written.append(path)

        put("report.json", self.to_json())
        put("timings.json", json.dumps(self.timings, indent=2, sort_keys=True) + "\n")
        trace = self.artifacts.get("trace")
        if fmt in (None, "csv"):
            put("summary.csv", self.summary_csv())
            put("rates.csv", self.rates_csv())
            if trace is not None:
                put("trace.csv", trace.to_csv())
        if fmt in (None, "json") and trace is not None:
            put("trace.json", trace.to_json() + "\n")
        mu = self.artifacts.get("mu")
        if isinstance(mu, moduli.TableModulus):
            put("mu.json", mu.to_json() + "\n")
        return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# Runner


class _DependencyFailed(RuntimeError):
    pass


class _Context:
    """Lazily computed shared inputs of the checks."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.inst = cfg.instance
        self.trace = iterations.run(cfg.scheme, cfg.instance, cfg.horizon)
        m = cfg.moduli
        self.ghp = moduli.build_gh(m["gh"])
        self.rho = moduli.build_modulus(m["rho"], self.inst)
        self.rho_approx = moduli.build_modulus(m["rho_approx"], self.inst)
        self.chi = moduli.build_modulus3(m["chi"], self.inst)
        self.gamma = moduli.build_modulus(m["gamma"], self.inst)
        use_dykstra = m["A"] == "dykstra" or (m["A"] == "auto" and self.trace.is_dykstra)
        self.A = iterations.dykstra_property(self.trace) if use_dykstra else iterations.trivial_property(self.trace)
        self._cache: dict = {}
        self.failed: dict = {}

    def rng(self, stream: str):
        return counter_rng(self.cfg.seed, stream)

    def need(self, key: str):
        if key in self.failed:
            raise _DependencyFailed(f"depends on {key}, which failed: {self.failed[key]}")
        if key not in self._cache:
            try:
                self._cache[key] = getattr(self, f"_make_{key}")()
            except Exception as e:
                self.failed[key] = f"{type(e).__name__}: {e}"
                raise _DependencyFailed(f"depends on {key}, which failed: {self.failed[key]}") from e
        return self._cache[key]

    @property
    def ball_radius(self) -> float:
        r = self.cfg.discovery.get("ball_radius")
        return float(self.inst.b if r is None else r)

    def _make_discovered_mu(self):
        d = self.cfg.discovery
        k_max = self.cfg.k_max if d.get("k_max") is None else d["k_max"]
        return moduli.discover_regularity(self.inst, self.ball_radius, d["grid_step"], k_max,
                                          tail=d.get("tail"))

    def _make_mu(self):
        if self.cfg.moduli["mu"] == "discover":
            return self.need("discovered_mu")
        return moduli.build_modulus(self.cfg.moduli["mu"], self.inst)

    def _make_phi(self):
        if self.cfg.moduli["phi"] == "empirical":
            return iterations.empirical_phi(self.trace, self.A, self.cfg.k_max)
        return moduli.build_modulus(self.cfg.moduli["phi"], self.inst)

    def p_in_C(self):
        P = iterations.sample_points_in_C(self.inst, self.trace, self.cfg.samples["p"], self.rng("p-in-C"))
        if self.cfg.extra_p:
            P = np.vstack([P, np.asarray(self.cfg.extra_p, dtype=float)])
        return P

    def inputs(self, rho) -> RateInputs:
        return RateInputs(phi=self.need("phi"), rho=rho, alpha_g=self.ghp.alpha_g, beta_h=self.ghp.beta_h,
                          mu=self.need("mu"), chi=self.chi, gamma=self.gamma)


def _verdict_entry(v: iterations.Verdict) -> dict:
    d = v.to_dict()
    d["status"] = "certified" if v.passed else "violated"
    return d


def _check_regularity_discovery(ctx: _Context) -> dict:
    mu = ctx.need("discovered_mu")
    return {"status": "certified", "mu": mu.to_dict(), "note": f"mu table for k <= {mu.verified_max}"}


def _check_phi(ctx: _Context) -> dict:
    phi = ctx.need("phi")
    table = phi.table(ctx.cfg.k_max)
    # re-read the defining property: some n <= Phi(k) is a k-approximate point with A(n, k)
    for k, n_max in enumerate(table):
        if not any(ctx.trace.residuals[n] < 1.0 / (k + 1) and ctx.A(n, k)
                   for n in range(min(n_max, ctx.trace.T) + 1)):
            return {"status": "violated", "table": table, "witness": {"k": k, "phi": n_max}}
    return {"status": "certified", "table": table, "A": ctx.A.name}


def _check_fejer_local(ctx: _Context) -> dict:
    P = ctx.p_in_C()
    exercised = 0
    for r in range(ctx.cfg.r_max + 1):
        m = ctx.rho(r)
        for p in P:
            v = iterations.check_fejer_local(ctx.trace, ctx.ghp, ctx.A, p, r, m)
            exercised += v.exercised
            if not v.passed:
                return {"status": "violated", "witness": v.witness, "exercised": exercised}
    return {"status": "certified", "exercised": exercised, "p_count": len(P), "rho": ctx.rho.name}


def _check_fejer_uniform(ctx: _Context) -> dict:
    v = iterations.check_fejer_uniform(ctx.trace, ctx.ghp, ctx.A, ctx.rho, ctx.p_in_C(), ctx.cfg.r_max)
    return _verdict_entry(v)


def _check_fejer_approx(ctx: _Context) -> dict:
    P = iterations.sample_approx_points(ctx.inst, ctx.trace, ctx.cfg.samples["p_approx"], ctx.rng("p-approx"))
    if ctx.cfg.extra_p:
        P = np.vstack([P, np.asarray(ctx.cfg.extra_p, dtype=float)])
    P = P[np.linalg.norm(P - ctx.inst.z, axis=1) <= ctx.inst.b]
    v = iterations.check_fejer_uniform_approx(ctx.trace, ctx.ghp, ctx.A, ctx.rho_approx, ctx.chi, P,
                                              ctx.cfg.r_max, ctx.cfg.m_max, ctx.inst)
    d = _verdict_entry(v)
    d["outside_C"] = int((geometry.residual_f(ctx.inst, P) > geometry.FEAS_TOL).sum())
    return d


def _check_non_fejer(ctx: _Context) -> dict:
    v = iterations.find_non_fejer_witness(ctx.trace, ctx.p_in_C())
    d = _verdict_entry(v)
    d["note"] = "witness of an ordinary Fejér violation" if v.passed else "no increase of d(x_n, p) observed"
    return d


def _check_coincidence(ctx: _Context) -> dict:
    c = ctx.cfg.coincidence
    if ctx.cfg.scheme.kind == "dykstra":
        schemes = c.get("schemes", ["picard", "km", "halpern", "ishikawa"])
        descs = [SchemeDescriptor(s, ctx.inst.sets) for s in schemes]
    else:
        descs = [ctx.cfg.scheme]
    out = {}
    status = "certified"
    for desc in descs:
        tau = moduli.build_modulus2(ctx.cfg.moduli["tau"], desc.kind)
        X0 = iterations.sample_near_fixed_points(desc, ctx.cfg.samples["coincidence"],
                                                 ctx.rng(f"coincidence-{desc.kind}"),
                                                 center=ctx.inst.z, radius=c.get("radius", ctx.inst.b))
        v = iterations.check_coincidence(desc, tau, X0, c.get("k_max", 20), c.get("n_max", 20))
        entry = v.to_dict()
        entry.pop("samples")
        out[desc.kind] = entry
        if not v.passed:
            status = "violated"
    return {"status": status, "schemes": out}


def _check_regularity_falsify(ctx: _Context) -> dict:
    mu = ctx.need("mu")
    res = moduli.falsify_regularity(ctx.inst, mu, ctx.ball_radius, ctx.cfg.samples["falsify"],
                                    k_max=ctx.cfg.k_max, center=ctx.inst.z, rng=ctx.rng("regularity-falsify"))
    d = res.to_dict()
    d["status"] = "certified" if res.passed else "violated"
    d["mu"] = mu.name
    return d


def _check_cauchy(ctx: _Context) -> dict:
    if ctx.trace.is_dykstra:
        # Dykstra converges to the projection of x0 onto C
        limit = geometry.project_intersection(ctx.inst.sets, ctx.inst.x0[None, :])[0][0]
    else:
        limit = rates.scheme_limit(ctx.cfg.scheme, ctx.inst.x0)
    cert = rates.certify_cauchy(ctx.trace, limit, ctx.inputs(ctx.rho), ctx.cfg.k_max, ctx.inst,
                                ghp=ctx.ghp, A=ctx.A, audit_samples=ctx.cfg.samples["audit"],
                                rng=ctx.rng("cauchy-audit"))
    return {"status": cert.verdict, "certificate": cert.to_dict()}


def _check_metastability(ctx: _Context) -> dict:
    inputs = ctx.inputs(ctx.rho_approx)
    certs = []
    for g_spec in ctx.cfg.counterfunctions:
        g = Counterfunction.parse(g_spec)
        for k in range(ctx.cfg.meta_k_max + 1):
            certs.append(rates.certify_metastability(ctx.trace, k, g, inputs, ctx.cfg.ceiling).to_dict())
    verdicts = {c["verdict"] for c in certs}
    status = "certified" if verdicts == {"certified"} else (
        "violated" if "violated" in verdicts else "bound-overflow")
    candidates_ok = all(c["details"].get("candidate_witness") is not None for c in certs
                        if c["verdict"] == "certified")
    return {"status": status, "certificates": certs, "candidate_witness_found": candidates_ok}


def _check_reversal(ctx: _Context) -> dict:
    rv = ctx.cfg.reversal
    if "operator" in rv:
        op = tuple(geometry.set_from_dict(s) for s in rv["operator"])
        desc = SchemeDescriptor(rv.get("kind", "km"), op,
                                iterations.ParamSequence.from_json(rv.get("alpha", 0.5)),
                                iterations.ParamSequence.from_json(rv.get("beta", 0.5)))
    else:
        desc = ctx.cfg.scheme
        if len(desc.operator) != 1:
            raise ConfigError("scheme.operator", "reversal-regularity needs a single-set operator")
    s = desc.operator[0]
    center = geometry.as_vector(rv.get("center", ctx.inst.z), s.dim)
    radius = float(rv.get("radius", ctx.inst.b))
    k_max = rv.get("k_max", ctx.cfg.k_max)
    rng = ctx.rng("reversal-starts")
    n = rv.get("starts", 200)
    u = rng.normal(size=(n, s.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    # half the starts on the sphere, where the distance to Fix T is largest
    rad = np.where(np.arange(n) % 2 == 0, radius, radius * rng.random(n) ** (1.0 / s.dim))
    starts = center + u * rad[:, None]
    psi = rates.measure_common_rate(desc, starts, 2 * k_max + 1, rv.get("horizon", 400))
    tau = moduli.build_modulus2(rv.get("tau", "coincidence"), desc.kind)
    mu = rates.reversal_regularity(tau, psi)
    # for a single set, ||x - Tx|| is the distance to it, i.e. the feasibility residual
    z = s.project(center)
    inst = geometry.ProblemInstance((s,), center, z, max(1, int(np.ceil(np.linalg.norm(z - center) + radius))))
    res = moduli.falsify_regularity(inst, mu, radius, ctx.cfg.samples["falsify"], k_max=k_max, center=center,
                                    rng=ctx.rng("reversal-falsify"))
    return {"status": "certified" if res.passed else "violated", "scheme": desc.to_dict(),
            "psi": psi.values, "tau": tau.name, "mu": [mu(k) for k in range(k_max + 1)],
            "falsify": res.to_dict()}


_CHECKS = {
    "regularity-discovery": _check_regularity_discovery,
    "phi": _check_phi,
    "fejer-local": _check_fejer_local,
    "fejer-uniform": _check_fejer_uniform,
    "fejer-approx": _check_fejer_approx,
    "non-fejer-witness": _check_non_fejer,
    "coincidence": _check_coincidence,
    "regularity-falsify": _check_regularity_falsify,
    "cauchy-rate": _check_cauchy,
    "metastability": _check_metastability,
    "reversal-regularity": _check_reversal,
}


def _trace_summary(trace: iterations.IterationTrace, inst: geometry.ProblemInstance) -> dict:
    s = trace.summary()
    if trace.is_dykstra:
        err = trace.telescoping_error()
        s["telescoping_max_ratio"] = float((err / (1 + np.arange(trace.T + 1))).max())
        s["max_dist_to_z"] = float(np.linalg.norm(trace.points - inst.z, axis=1).max())
        s["a_value_T"] = float(trace.a_values[-1])
    return s


def run_experiment(config) -> Report:
    """Run every requested check; accepts an :class:`ExperimentConfig`, a dict or a path."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    elif not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_file(config)
    timings = {}
    t0 = time.perf_counter()
    ctx = _Context(config)
    timings["trace"] = time.perf_counter() - t0
    results = {}
    for name in CHECK_ORDER:
        if name not in config.checks:
            continue
        t0 = time.perf_counter()
        try:
            results[name] = _CHECKS[name](ctx)
        except _DependencyFailed as e:
            results[name] = {"status": "error", "note": str(e)}
        except Exception as e:  # recorded, not fatal
            results[name] = {"status": "error", "note": f"{type(e).__name__}: {e}"}
        timings[name] = time.perf_counter() - t0
    artifacts = {"trace": ctx.trace}
    if "discovered_mu" in ctx._cache:
        artifacts["mu"] = ctx._cache["discovered_mu"]
    return Report(config.echo(), _trace_summary(ctx.trace, config.instance), results, timings, artifacts)
