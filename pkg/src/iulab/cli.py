"""Config-driven runner: potential -> grid -> spectrum -> semigroup -> checks.

Configs are INI files.  Sections ``potential``, ``params``, ``grid``,
``spectral``, ``times``, ``admissibility``, ``output`` and ``study`` set up
the pipeline; every ``[check.<name>]`` (or ``[check.<name>.<label>]``)
section requests one check, optionally with ``expect = pass | fail |
stable | diverging | inconclusive``.  Unknown sections and keys are errors.

Exit status: 0 when every check meets its expectation, 1 otherwise, 2 for
a bad config, 3 when a grid exceeds capacity or a solver does not converge.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import potential as pot
from .auxmath import IteratedLogParams, RosenConstants, rosen_gamma
from .discretize import Grid, write_node_csv
from .eigensolve import write_pairs_csv
from .errors import CapacityError, ConfigError, ConvergenceError, DomainError
from .verify import (ANCHORS, VerificationReport, chain_bound_check, decay_constant,
                     drift, duality_check, eigen_domination, fit_rosen_constant,
                     gross_monotonicity, iuc_constant, log_sobolev_check, prepare,
                     radial_supersolution_check, rosen_fit, stability_verdict,
                     boundary_radius)
from .semigroup import weighted_kernel, weighted_kernel_norms

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3
VERDICTS = ("pass", "fail", "stable", "diverging", "inconclusive")
# the chain identity is exact, so allow rounding relative to norms that reach 1e8+
CHAIN_REL_SLACK = 1e-12


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return " ".join(fmt(v) for v in x)
    if x is None:
        return ""
    return str(x)


# ---------------------------------------------------------------------------
# config schema


def _floats(s):
    return [float(v) for v in s.replace(",", " ").split()]


def _ints(s):
    return [int(v) for v in s.replace(",", " ").split()]


def _spectrum(s):
    s = s.strip().lower()
    return "full" if s == "full" else int(s)


SECTIONS = {
    "potential": {"family": str, "alpha": float, "c": float, "n0": int, "l": float},
    "params": {"k": float, "m": int, "d": float, "c_rosen": float, "c_ls": float},
    "grid": {"n": int, "l": float, "l_list": _floats, "n_points": int, "h": float},
    "spectral": {"j": _spectrum, "tol": float},
    "times": {"t_list": _floats},
    "admissibility": {"r_max": float, "r_count": int, "tail_tol": float,
                      "sphere_count": int},
    "output": {"directory": str, "kernel_csv_max": int},
    "study": {"vary": str, "h_list": _floats, "l_list": _floats, "e0_exact": float,
              "t": float, "eps": float},
}

CHECKS = {
    "check_admissibility": {},
    "iuc_stability_study": {"t": float, "l_list": _floats, "n_per_l": float,
                            "stable_tol": float, "diverge_factor": float},
    "rosen_fit": {"eps_list": _floats, "l_list": _floats, "margin": float,
                  "stable_tol": float},
    "decay_constant": {"l_list": _floats, "stable_tol": float},
    "eigen_domination": {"j": int, "l_list": _floats, "margin": float,
                         "stable_tol": float},
    "log_sobolev_check": {"t": float, "p": float, "eps_list": _floats, "samples": int,
                          "tol": float},
    "gross_monotonicity": {"t": float, "s_count": int, "path": _floats, "samples": int},
    "chain_bound_check": {"t_list": _floats, "slack": float, "rel_slack": float},
    "duality_check": {"t": float, "samples": int},
    "radial_supersolution_check": {"e0_list": _floats, "n_list": _ints, "r_max": float,
                                   "r_count": int},
}

DEFAULTS = {
    "potential": {"family": "power", "alpha": 4.0, "c": 1.0, "n0": 1, "l": 2.0},
    "params": {"k": 1.0, "m": 1, "d": 1.0, "c_rosen": math.nan, "c_ls": 0.0},
    "grid": {"n": 1, "l": 8.0, "h": 0.05},
    "spectral": {"j": "full", "tol": 1e-8},
    "times": {"t_list": [0.5]},
    "admissibility": {"r_max": 50.0, "r_count": 400, "tail_tol": 1e-2, "sphere_count": 32},
    "output": {"directory": "out", "kernel_csv_max": 400},
    "study": {"t": 0.5, "eps": 1.0},
}

FAMILIES = ("power", "power-log", "harmonic", "free")


@dataclass
class RunConfig:
    sections: dict
    checks: list = field(default_factory=list)   # (section name, check name, options)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(
            key, DEFAULTS.get(section, {}).get(key, default))


def _parse_value(section, key, raw, schema):
    if key not in schema:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    try:
        return schema[key](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def load_config(path_or_text, *, is_text=False) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                   interpolation=None)
    try:
        if is_text:
            cp.read_string(path_or_text)
        else:
            with open(path_or_text) as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    sections, checks = {}, []
    for name in cp.sections():
        if name.startswith("check."):
            parts = name.split(".")
            check = parts[1] if len(parts) >= 2 else ""
            if check not in CHECKS or len(parts) > 3:
                raise ConfigError(f"unknown check section [{name}]")
            schema = dict(CHECKS[check], expect=str)
            opts = {k: _parse_value(name, k, v, schema) for k, v in cp.items(name)}
            expect = opts.get("expect", "pass")
            if expect not in VERDICTS:
                raise ConfigError(f"[{name}] expect must be one of {VERDICTS}")
            opts["expect"] = expect
            checks.append((name, check, opts))
        elif name in SECTIONS:
            sections[name] = {k: _parse_value(name, k, v, SECTIONS[name])
                              for k, v in cp.items(name)}
        else:
            raise ConfigError(f"unknown section [{name}]")
    cfg = RunConfig(sections, checks)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    fam = cfg.get("potential", "family")
    need(fam in FAMILIES, f"potential family must be one of {FAMILIES}")
    need(cfg.get("potential", "alpha") > 0, "alpha must be positive")
    need(cfg.get("potential", "c") >= 0, "c must be >= 0")
    need(cfg.get("potential", "n0") >= 1, "n0 must be >= 1")
    need(cfg.get("potential", "l") > 0, "l must be positive")
    need(cfg.get("params", "k") > 0, "k must be positive")
    need(cfg.get("params", "m") >= 1, "m must be >= 1")
    need(0 < cfg.get("params", "d") <= 1, "d must lie in (0, 1]")
    need(cfg.get("grid", "n") in (1, 2, 3), "grid n must be 1, 2 or 3")
    Ls = cfg.get("grid", "l_list") or [cfg.get("grid", "l")]
    need(all(L > 0 for L in Ls), "L must be positive")
    g = cfg.sections.get("grid", {})
    need(not ("h" in g and "n_points" in g), "give at most one of h and n_points")
    need(cfg.get("grid", "h") > 0, "h must be positive")
    if "n_points" in g:
        need(g["n_points"] >= 3, "n_points must be >= 3")
    J = cfg.get("spectral", "j")
    need(J == "full" or J >= 1, "J must be 'full' or a positive integer")
    need(cfg.get("spectral", "tol") > 0, "tol must be positive")
    need(all(t > 0 for t in cfg.get("times", "t_list")), "times must be positive")
    need(cfg.get("admissibility", "r_count") >= 10, "r_count must be >= 10")
    st = cfg.sections.get("study", {})
    if "h_list" in st or "l_list" in st:
        need(("h_list" in st) != ("l_list" in st), "vary exactly one of h_list and L_list")
    for name, check, opts in cfg.checks:
        for key in ("t", "p"):
            if key in opts:
                need(opts[key] > 0, f"[{name}] {key} must be positive")
        if "p" in opts:
            need(1 < opts["p"] <= 2, f"[{name}] p must lie in (1, 2]")
        if "path" in opts:
            need(len(opts["path"]) == 2 and 1 <= opts["path"][0] < opts["path"][1],
                 f"[{name}] path must be 'q1, q2' with 1 <= q1 < q2")
        if "eps_list" in opts:
            need(all(e > 0 for e in opts["eps_list"]), f"[{name}] eps must be positive")


# ---------------------------------------------------------------------------
# pipeline


def build_potential(cfg: RunConfig) -> pot.PotentialSpec:
    fam = cfg.get("potential", "family")
    prm = IteratedLogParams(cfg.get("params", "k"), cfg.get("params", "m"))
    d = cfg.get("params", "d")
    if fam == "free":
        return pot.free_potential()
    if fam == "harmonic":
        spec = pot.harmonic_potential()
        spec.params, spec.d = prm, d
        return spec
    if fam == "power":
        e = pot.EnvelopeSpec("power", alpha=cfg.get("potential", "alpha"),
                             c=cfg.get("potential", "c"))
    else:
        e = pot.EnvelopeSpec("power-log", n0=cfg.get("potential", "n0"),
                             l=cfg.get("potential", "l"), c=cfg.get("potential", "c"))
    return pot.radial_potential(e, prm, d)


class Runner:
    def __init__(self, cfg: RunConfig, out: str, seed: int = 0):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.spec = build_potential(cfg)
        self.n = cfg.get("grid", "n")
        self._cache = {}
        self.reports: list[tuple[VerificationReport, str]] = []
        self.prm = IteratedLogParams(cfg.get("params", "k"), cfg.get("params", "m"))

    # -- helpers
    def grid(self, L, h=None) -> Grid:
        g = self.cfg.sections.get("grid", {})
        if h is None and "n_points" in g:
            return Grid(self.n, L, g["n_points"])
        return Grid.from_spacing(self.n, L, h or self.cfg.get("grid", "h"))

    def problem(self, L, h=None):
        g = self.grid(L, h)
        key = (g.n, g.L, g.N)
        if key not in self._cache:
            J = self.cfg.get("spectral", "j")
            tol = self.cfg.get("spectral", "tol")
            if J == "full":
                self._cache[key] = prepare(self.spec, g, full=True, tol=tol)
            else:
                self._cache[key] = prepare(self.spec, g, full=False, J=J, tol=tol,
                                           seed=self.seed)
        return self._cache[key]

    def L_list(self, opts=None):
        if opts and "l_list" in opts:
            return opts["l_list"]
        return self.cfg.get("grid", "l_list") or [self.cfg.get("grid", "l")]

    def rosen_constants(self, pb):
        rc0 = RosenConstants(self.cfg.get("params", "d"), self.n, 0.0,
                             self.cfg.get("params", "c_ls"))
        C = self.cfg.get("params", "c_rosen")
        if math.isnan(C):
            ref = rosen_fit(pb.ground, pb.grid, pb.hamiltonian.potential, [1.0])[1.0]
            C = fit_rosen_constant(ref, self.prm, rc0)
        return RosenConstants(rc0.d, rc0.n, C, rc0.C_ls)

    def samples(self, count, size):
        for i in range(count):
            rng = np.random.default_rng([self.seed, i])
            yield i, rng.random(size)

    def add(self, rep, expect="pass"):
        self.reports.append((rep, expect))

    def path(self, name):
        return os.path.join(self.out, name)

    # -- subcommands
    def check_potential(self, expect="pass"):
        r = np.linspace(self.cfg.get("admissibility", "r_max") / self.cfg.get("admissibility", "r_count"),
                        self.cfg.get("admissibility", "r_max"),
                        self.cfg.get("admissibility", "r_count"))
        if self.spec.envelope is None:
            raise ConfigError("the free potential has no envelope to check")
        rep = pot.check_admissibility(self.spec, r, self.cfg.get("admissibility", "tail_tol"),
                                      n=self.n,
                                      sphere_count=self.cfg.get("admissibility", "sphere_count"))
        rep.write_csv(self.path("check_admissibility.csv"))
        s = rep.summary()
        self.add(VerificationReport(
            "check_admissibility",
            {"family": self.cfg.get("potential", "family"), "k": self.prm.k, "m": self.prm.m,
             "r_max": float(r[-1])},
            s["R_m"] if s["R_m"] is not None else math.nan,
            "pass" if rep.admissible else "fail",
            residuals={k: v for k, v in s.items() if k not in ("admissible",)},
            notes="value is R_m",
        ), expect)

    def ground_state(self):
        for L in self.L_list():
            pb = self.problem(L)
            tag = f"L{fmt(L)}"
            write_pairs_csv(self.path(f"eigenpairs_{tag}.csv"),
                            [p for p in pb.propagator.pairs[: min(pb.propagator.J, 50)]])
            write_node_csv(self.path(f"ground_state_{tag}.csv"), pb.grid,
                           {"phi": pb.ground.phi})
            self.add(VerificationReport(
                "ground_state", {"L": L, "h": pb.grid.h, "N": pb.grid.N},
                pb.ground.E0, "pass" if pb.ground.min_phi > 0 else "fail",
                residuals={"min_phi": pb.ground.min_phi, "gap": pb.ground.gap}))

    def kernel(self):
        cap = self.cfg.get("output", "kernel_csv_max")
        for L in self.L_list():
            pb = self.problem(L)
            for t in self.cfg.get("times", "t_list"):
                val = iuc_constant(pb.propagator, pb.space, t)
                norms = weighted_kernel_norms(pb.propagator, pb.space, t)
                self.add(VerificationReport("iuc_constant", {"L": L, "t": t, "h": pb.grid.h},
                                            val, "pass" if math.isfinite(val) else "fail",
                                            residuals=norms))
                if pb.grid.size <= cap:
                    K = weighted_kernel(pb.propagator, pb.space, t)
                    with open(self.path(f"kernel_L{fmt(L)}_t{fmt(t)}.csv"), "w", newline="") as fh:
                        w = csv.writer(fh)
                        for row in K:
                            w.writerow([fmt(v) for v in row])

    def verify(self):
        for name, check, opts in self.cfg.checks:
            getattr(self, "_" + check)(name, opts)

    # -- checks
    def _check_admissibility(self, name, o):
        self.check_potential(o["expect"])

    def _iuc_stability_study(self, name, o):
        t = o.get("t", self.cfg.get("times", "t_list")[0])
        h = 1.0 / o["n_per_l"] if "n_per_l" in o else None
        series = []
        for L in self.L_list(o):
            pb = self.problem(L, h)
            series.append((L, iuc_constant(pb.propagator, pb.space, t)))
        vals = [v for _, v in series]
        verdict = stability_verdict(vals, o.get("stable_tol", 0.05), o.get("diverge_factor", 2.0))
        self.add(VerificationReport(
            "iuc_stability_study", {"t": t, "L_list": self.L_list(o)},
            vals[-1] / vals[0], verdict, series=series, columns=("L", "iuc_constant"),
            notes="value is last/first ratio"), o["expect"])

    def _stable_series(self, vals, tol):
        if len(vals) < 2:
            return "pass" if all(math.isfinite(v) for v in vals) else "fail"
        return "stable" if drift(vals) <= tol else "fail"

    def _rosen_fit(self, name, o):
        eps = o.get("eps_list", [0.05, 0.1, 0.2, 0.5, 1.0])
        fits, C = [], None
        for L in self.L_list(o):
            pb = self.problem(L)
            fits.append((L, rosen_fit(pb.ground, pb.grid, pb.hamiltonian.potential, eps,
                                      o.get("margin"))))
            rc = self.rosen_constants(pb)
        last = fits[-1][1]
        mono = all(last[a] >= last[b] for a, b in zip(sorted(eps), sorted(eps)[1:]))
        for e in eps:
            vals = [f[e] for _, f in fits]
            verdict = self._stable_series(vals, o.get("stable_tol", 0.05))
            try:
                formula = rosen_gamma(self.prm, rc, e)
            except OverflowError:
                formula = math.inf
            if not (mono and vals[-1] <= formula):
                verdict = "fail"
            self.add(VerificationReport(
                "rosen_fit", {"eps": e, "L_list": self.L_list(o)}, vals[-1], verdict,
                series=[(L, f[e]) for L, f in fits], columns=("L", "gamma_hat"),
                residuals={"formula_gamma": formula, "C_rosen": rc.C_rosen,
                           "non_increasing": mono}), o["expect"])

    def _decay_constant(self, name, o):
        series = []
        for L in self.L_list(o):
            pb = self.problem(L)
            C, x = decay_constant(pb.ground, pb.grid)
            series.append((L, C))
        vals = [v for _, v in series]
        self.add(VerificationReport(
            "decay_constant", {"L_list": self.L_list(o)}, vals[-1],
            self._stable_series(vals, o.get("stable_tol", 0.05)), series=series,
            columns=("L", "C_decay"), residuals={"argmax": x}), o["expect"])

    def _eigen_domination(self, name, o):
        J = o.get("j", 2)
        per_L = []
        for L in self.L_list(o):
            pb = self.problem(L)
            per_L.append((L, eigen_domination(pb.propagator, o.get("margin"), J)))
        for j in range(min(len(c) for _, c in per_L)):
            vals = [c[j] for _, c in per_L]
            self.add(VerificationReport(
                "eigen_domination", {"j": j, "L_list": self.L_list(o)}, vals[-1],
                self._stable_series(vals, o.get("stable_tol", 0.05)),
                series=[(L, c[j]) for L, c in per_L], columns=("L", "C_lambda")),
                o["expect"])

    def _log_sobolev_check(self, name, o):
        t, p = o.get("t", 0.5), o.get("p", 2.0)
        tol = o.get("tol", 1e-8)
        for L in self.L_list():
            pb = self.problem(L)
            rc = self.rosen_constants(pb)
            for i, u in self.samples(o.get("samples", 5), pb.grid.size):
                for e in o.get("eps_list", [0.5, 1.0, 2.0]):
                    r = log_sobolev_check(pb.propagator, pb.space, u, t, p, e, self.prm, rc)
                    self.add(VerificationReport(
                        "log_sobolev_check",
                        {"L": L, "t": t, "p": p, "eps": e, "seed": self.seed, "sample": i},
                        r.residual, "pass" if r.residual >= -tol else "fail",
                        residuals={"lhs": r.lhs, "rhs": r.rhs, "C_rosen": rc.C_rosen}),
                        o["expect"])

    def _gross_monotonicity(self, name, o):
        t = o.get("t", 0.5)
        path = tuple(o.get("path", [1.0, 2.0]))
        s = np.linspace(0.0, t, o.get("s_count", 11))
        for L in self.L_list():
            pb = self.problem(L)
            rc = self.rosen_constants(pb)
            for i, u in self.samples(o.get("samples", 5), pb.grid.size):
                g = gross_monotonicity(pb.propagator, pb.space, u, t, s, self.prm, rc, path)
                self.add(VerificationReport(
                    "gross_monotonicity",
                    {"L": L, "t": t, "path": list(path), "seed": self.seed, "sample": i},
                    float(np.max(np.diff(g.values)) / g.values[0]), g.verdict,
                    series=list(zip(g.s, g.values)), columns=("s", "value"),
                    notes="value is max relative increase"), o["expect"])

    def _chain_bound_check(self, name, o):
        for L in self.L_list():
            pb = self.problem(L)
            for t in o.get("t_list", [0.125, 0.25]):
                rep = chain_bound_check(pb.propagator, pb.space, t, o.get("slack", 1e-8),
                                        o.get("rel_slack", CHAIN_REL_SLACK))
                rep.params["L"] = L
                self.add(rep, o["expect"])

    def _duality_check(self, name, o):
        t = o.get("t", 0.5)
        for L in self.L_list():
            pb = self.problem(L)
            vecs = [u for _, u in self.samples(2 * o.get("samples", 3), pb.grid.size)]
            for i in range(0, len(vecs), 2):
                res = duality_check(pb.propagator, pb.space, t, vecs[i] - 0.5, vecs[i + 1] - 0.5)
                self.add(VerificationReport(
                    "duality_check", {"L": L, "t": t, "seed": self.seed, "sample": i // 2},
                    res, "pass" if res <= 1e-10 else "fail"), o["expect"])

    def _radial_supersolution_check(self, name, o):
        for n in o.get("n_list", [1, 2, 3]):
            for E0 in o.get("e0_list", [0.0, 1.0, 2.0]):
                r0 = boundary_radius(E0)
                rs = np.linspace(r0, o.get("r_max", 20.0), o.get("r_count", 200))
                vals = [radial_supersolution_check(1.0, n, E0, float(r)) for r in rs]
                self.add(VerificationReport(
                    "radial_supersolution_check", {"beta": 1.0, "n": n, "E0": E0},
                    min(vals), "pass" if min(vals) >= 0 else "fail",
                    residuals={"at_boundary": vals[0]}), o["expect"])

    # -- studies
    def study(self):
        rows = convergence_study(self)
        with open(self.path("convergence.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "L", "E0", "C_t", "gamma_hat", "C_decay", "order"])
            for r in rows:
                w.writerow([fmt(r[k]) for k in ("h", "L", "E0", "C_t", "gamma_hat",
                                                 "C_decay", "order")])
        return rows


def convergence_study(runner: Runner) -> list[dict]:
    """One row per refinement level: ``h, L, E0, C_t, gamma_hat, C_decay, order``.

    ``order`` is the observed order of ``E0`` when ``h`` varies.  It uses the
    exact value ``e0_exact`` when given, else three successive levels.
    """
    cfg = runner.cfg
    st = cfg.sections.get("study", {})
    t, eps = cfg.get("study", "t"), cfg.get("study", "eps")
    if "h_list" in st:
        levels = [(cfg.get("grid", "l"), h) for h in st["h_list"]]
    elif "l_list" in st:
        levels = [(L, None) for L in st["l_list"]]
    else:
        raise ConfigError("[study] needs h_list or L_list")
    rows = []
    for L, h in levels:
        pb = runner.problem(L, h)
        try:
            C_t = iuc_constant(pb.propagator, pb.space, t)
        except CapacityError:
            C_t = None
        gam = rosen_fit(pb.ground, pb.grid, pb.hamiltonian.potential, [eps])[eps]
        C_decay, _ = decay_constant(pb.ground, pb.grid)
        rows.append({"h": pb.grid.h, "L": L, "E0": pb.ground.E0, "C_t": C_t,
                     "gamma_hat": gam, "C_decay": C_decay, "order": None})
    if "h_list" in st:
        exact = st.get("e0_exact")
        for i in range(len(rows)):
            h0 = rows[i - 1]["h"] if i >= 1 else None
            if exact is not None and i >= 1:
                e0 = abs(rows[i - 1]["E0"] - exact)
                e1 = abs(rows[i]["E0"] - exact)
                if e0 > 0 and e1 > 0:
                    rows[i]["order"] = math.log(e0 / e1) / math.log(h0 / rows[i]["h"])
            elif exact is None and i >= 2:
                d0 = abs(rows[i - 2]["E0"] - rows[i - 1]["E0"])
                d1 = abs(rows[i - 1]["E0"] - rows[i]["E0"])
                if d0 > 0 and d1 > 0:
                    rows[i]["order"] = math.log(d0 / d1) / math.log(h0 / rows[i]["h"])
    return rows


# ---------------------------------------------------------------------------
# output


def write_reports(runner: Runner, command: str) -> bool:
    ok_all = True
    with open(runner.path("report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "anchor", "params", "value", "verdict", "expect", "status"])
        for rep, expect in runner.reports:
            ok = rep.verdict == expect or (expect == "pass" and rep.verdict == "stable")
            ok_all &= ok
            params = ";".join(f"{k}={fmt(v)}" for k, v in rep.params.items())
            w.writerow([rep.check, ANCHORS.get(rep.check, rep.check), params,
                        fmt(rep.value), rep.verdict, expect, "ok" if ok else "unexpected"])
    by_check = {}
    for rep, _ in runner.reports:
        if rep.series:
            by_check.setdefault(rep.check, []).append(rep)
    for check, reps in by_check.items():
        with open(runner.path(f"{check}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row"] + list(reps[0].columns))
            for i, rep in enumerate(reps):
                for a, b in rep.series:
                    w.writerow([i, fmt(a), fmt(b)])
    with open(runner.path("summary.txt"), "w") as fh:
        fh.write(f"command: {command}\n")
        fh.write(f"potential: {runner.spec.name}\n")
        fh.write(f"seed: {runner.seed}\n")
        fh.write(f"checks: {len(runner.reports)}\n\n")
        for rep, expect in runner.reports:
            ok = rep.verdict == expect or (expect == "pass" and rep.verdict == "stable")
            fh.write(f"[{rep.check}] {ANCHORS.get(rep.check, '')}\n")
            for k, v in rep.params.items():
                fh.write(f"  {k} = {fmt(v)}\n")
            fh.write(f"  value = {fmt(rep.value)}\n")
            for k, v in rep.residuals.items():
                fh.write(f"  {k} = {fmt(v)}\n")
            if rep.notes:
                fh.write(f"  note: {rep.notes}\n")
            fh.write(f"  verdict = {rep.verdict} (expected {expect}): "
                     f"{'ok' if ok else 'UNEXPECTED'}\n\n")
        fh.write("result: " + ("all checks as expected\n" if ok_all else "some checks failed\n"))
    return ok_all


# ---------------------------------------------------------------------------
# entry point


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iulab", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("check-potential", "test the admissibility conditions"),
                        ("ground-state", "solve for E0 and phi"),
                        ("kernel", "weighted kernels and their norms"),
                        ("verify", "run the [check.*] sections"),
                        ("study", "convergence study over h_list or L_list")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None)
    return ap


def run(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.get("output", "directory")
    os.makedirs(out, exist_ok=True)
    if args.threads:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(args.threads)
    else:
        limiter = None
    try:
        runner = Runner(cfg, out, args.seed)
        if args.command == "check-potential":
            runner.check_potential()
        elif args.command == "ground-state":
            runner.ground_state()
        elif args.command == "kernel":
            runner.kernel()
        elif args.command == "verify":
            runner.verify()
        else:
            runner.study()
        ok = write_reports(runner, args.command)
    except (CapacityError, ConvergenceError) as exc:
        print(f"capacity/convergence error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    return EXIT_OK if ok else EXIT_FAIL


def main():
    sys.exit(run())
