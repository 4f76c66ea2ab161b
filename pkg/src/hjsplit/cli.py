"""Command line front end: strict JSON configuration, pipeline stages and report files.

Exit codes: 0 when every configured check passes, 1 when a stage fails or a
check is violated, 2 for configuration errors (including resonant
frequencies).  Diagnostics name the failing stage.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import homological as hom
from .homological import Frequency, HomologicalError
from .kam import KamError, KamProblem, hj_residual, kam_iterate
from .normalform import (NormalFormError, average_out, change_angles, complete_basis, localize_and_scale,
                         make_frame)
from .separatrix import SeparatrixError, build_separatrix, chi, time_map
from .series import FourierTable, MomentumJet, SeriesError
from .splitting import (ManifoldRuns, SplittingError, _ray_angles, analyze_splitting, melnikov_oracle)

log = logging.getLogger("hjsplit")


class ConfigError(ValueError):
    """Schema violation; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


# ---------------------------------------------------------------- configuration
REQUIRED = ("n", "k0", "omega0", "tau", "K_check", "potential", "perturbation", "eps_list", "mu", "cutoffs",
            "tolerances", "seeds")
OPTIONAL = {
    "Q0": None, "R0": None, "domain_halfwidth": 3.0, "zeta": 1.2, "delta": 0.025, "delta0": 0.1,
    "N_ray": 256, "Nt": 128, "max_iter": 8,
}
TOLERANCES = ("residual", "exactness", "decay_slack")


@dataclass
class ExperimentConfig:
    n: int
    k0: tuple
    omega0: tuple
    tau: float
    K_check: int
    potential: FourierTable
    perturbation: MomentumJet
    eps_list: tuple
    mu: float
    cutoffs: tuple
    tolerances: dict
    seeds: int
    Q0: np.ndarray | None = None
    R0: float | None = None
    domain_halfwidth: float = 3.0
    zeta: float = 1.2
    delta: float = 0.025
    delta0: float = 0.1
    N_ray: int = 256
    Nt: int = 128
    max_iter: int = 8
    source: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return max(self.cutoffs[1:]) if len(self.cutoffs) > 1 else self.cutoffs[0]


def _load_ref(ref, base: Path, what: str, problems: list):
    if isinstance(ref, dict):
        return ref
    if not isinstance(ref, str):
        problems.append(f"{what}: expected a file path or an inline object")
        return None
    path = (base / ref) if not os.path.isabs(ref) else Path(ref)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        problems.append(f"{what}: file not found: {ref}")
    except json.JSONDecodeError as exc:
        problems.append(f"{what}: invalid JSON in {ref}: {exc}")
    return None


def _as_jet(d: dict, dims: int, what: str, problems: list):
    try:
        if "nvars" in d:
            jet = MomentumJet.from_dict(d)
        else:
            jet = MomentumJet(dims, {(0,) * dims: FourierTable.from_dict(d)})
    except (SeriesError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"{what}: {exc}")
        return None
    if jet.nvars != dims:
        problems.append(f"{what}: expected {dims} variables, found {jet.nvars}")
        return None
    for m, t in jet.terms.items():
        if sum(m) > 2:
            problems.append(f"{what}: monomial {m} has degree above 2")
        if t.dims != dims:
            problems.append(f"{what}: table for {m} has {t.dims} angles, expected {dims}")
    return jet


def validate(raw, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse and check a configuration mapping; raises :class:`ConfigError` listing all problems."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be an object"])
    for k in REQUIRED:
        if k not in raw:
            problems.append(f"{k}: missing required field")
    unknown = [f"{k}: unknown field" for k in sorted(set(raw) - set(REQUIRED) - set(OPTIONAL))]
    if problems:
        raise ConfigError(problems + unknown)
    problems.extend(unknown)
    base = Path(base_dir)

    def num(key, cond, msg, kind=float):
        v = raw[key]
        try:
            if kind is int and (isinstance(v, bool) or int(v) != v):
                raise ValueError
            v = kind(v)
        except (TypeError, ValueError):
            problems.append(f"{key}: expected {kind.__name__}")
            return None
        if not cond(v):
            problems.append(f"{key}: {msg}")
        return v

    n = num("n", lambda v: v in (1, 2), "must be 1 or 2", int)
    tau = num("tau", lambda v: v >= 0, "must be non-negative")
    K_check = num("K_check", lambda v: v >= 1, "must be positive", int)
    mu = num("mu", lambda v: math.isfinite(v) and v >= 0, "must be finite and non-negative")
    seeds = num("seeds", lambda v: v >= 1, "must be positive", int)
    k0 = raw["k0"]
    if not (isinstance(k0, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in k0)):
        problems.append("k0: expected a list of integers")
        k0 = None
    elif n is not None and len(k0) != n + 1:
        problems.append(f"k0: expected {n + 1} entries")
    elif math.gcd(*[abs(v) for v in k0]) != 1:
        problems.append("k0: entries must be coprime (minimal lattice vector)")
    om = raw["omega0"]
    if not (isinstance(om, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in om)):
        problems.append("omega0: expected a list of reals")
        om = None
    elif n is not None and len(om) != n:
        problems.append(f"omega0: expected {n} entries")
    eps = raw["eps_list"]
    if not (isinstance(eps, list) and eps and all(isinstance(v, (int, float)) for v in eps)):
        problems.append("eps_list: expected a non-empty list of reals")
        eps = None
    else:
        if any(not v > 0 for v in eps):
            problems.append("eps_list: entries must be positive")
        if list(eps) != sorted(eps):
            problems.append("eps_list: must be sorted ascending")
    cut = raw["cutoffs"]
    if not (isinstance(cut, list) and all(isinstance(v, int) and v >= 1 for v in cut)):
        problems.append("cutoffs: expected a list of positive integers")
        cut = None
    elif n is not None and len(cut) != n + 1:
        problems.append(f"cutoffs: expected {n + 1} entries (x and each rotator angle)")
    tol = raw["tolerances"]
    if not isinstance(tol, dict):
        problems.append("tolerances: expected an object")
        tol = None
    else:
        for k in TOLERANCES:
            if k not in tol:
                problems.append(f"tolerances.{k}: missing required field")
            elif not (isinstance(tol[k], (int, float)) and tol[k] > 0):
                problems.append(f"tolerances.{k}: must be positive")
        for k in sorted(set(tol) - set(TOLERANCES)):
            problems.append(f"tolerances.{k}: unknown field")
    opts = dict(OPTIONAL)
    for k in OPTIONAL:
        if k in raw:
            opts[k] = raw[k]
    if opts["Q0"] is not None:
        try:
            Q0 = np.asarray(opts["Q0"], float)
            if n is not None and Q0.shape != (n + 1, n + 1):
                problems.append(f"Q0: expected a {n + 1}x{n + 1} matrix")
            opts["Q0"] = Q0
        except (TypeError, ValueError):
            problems.append("Q0: expected a matrix of reals")
    for k, lo in (("domain_halfwidth", 0.0), ("zeta", 0.0), ("delta", 0.0), ("delta0", 0.0)):
        if not (isinstance(opts[k], (int, float)) and opts[k] > lo):
            problems.append(f"{k}: must be positive")
    if opts["R0"] is not None and not (isinstance(opts["R0"], (int, float)) and opts["R0"] > 0):
        problems.append("R0: must be positive")
    for k, lo in (("N_ray", 16), ("Nt", 16), ("max_iter", 1)):
        if not (isinstance(opts[k], int) and opts[k] >= lo):
            problems.append(f"{k}: must be an integer >= {lo}")
    if isinstance(opts["Nt"], int) and opts["Nt"] % 2:
        problems.append("Nt: must be even")
    pot = pert = None
    d = _load_ref(raw["potential"], base, "potential", problems)
    if d is not None:
        try:
            pot = FourierTable.from_dict(d)
            if pot.dims != 1:
                problems.append("potential: must be a table in the resonant angle only")
        except (SeriesError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"potential: {exc}")
    d = _load_ref(raw["perturbation"], base, "perturbation", problems)
    if d is not None and n is not None:
        pert = _as_jet(d, n + 1, "perturbation", problems)
    if problems:
        raise ConfigError(problems)
    if opts["zeta"] >= math.pi / 2:
        raise ConfigError(["zeta: must lie below pi/2"])
    cfg = ExperimentConfig(n, tuple(k0), tuple(float(v) for v in om), tau, K_check, pot, pert,
                           tuple(float(v) for v in eps), mu, tuple(cut), {k: float(tol[k]) for k in TOLERANCES},
                           seeds, source=raw, **opts)
    # frequencies: resonance is a configuration error
    try:
        model_frequency(cfg, cfg.eps_list[0])
    except (HomologicalError, NormalFormError) as exc:
        raise ConfigError([f"omega0: {exc}"]) from None
    return cfg


# ---------------------------------------------------------------- pipeline
@dataclass
class Model:
    eps: float
    frame: object
    H: MomentumJet
    H_nu: MomentumJet
    freq: Frequency
    sep: object
    theta: np.ndarray
    averaging: object


def _full_omega(cfg: ExperimentConfig):
    B = complete_basis(list(cfg.k0))
    return np.linalg.solve(np.asarray(B, float), np.concatenate([[0.0], cfg.omega0])), B


def model_frequency(cfg: ExperimentConfig, eps: float) -> Frequency:
    omega, B = _full_omega(cfg)
    frame = make_frame(cfg.k0, omega, tau=cfg.tau, K_max=cfg.K_check)
    Q0 = np.eye(cfg.n + 1) if cfg.Q0 is None else cfg.Q0
    Qn = np.asarray(B, float) @ Q0 @ np.asarray(B, float).T
    R0 = float(Qn[0, 0]) if cfg.R0 is None else cfg.R0
    w1 = np.asarray(frame.omega0.omega) / math.sqrt(eps * R0)
    return Frequency.build(w1, tau=cfg.tau, K_max=cfg.K_check)


def build_model(cfg: ExperimentConfig, eps: float) -> Model:
    """Scaled resonant Hamiltonian, averaging and separatrix for one value of eps."""
    omega, B = _full_omega(cfg)
    try:
        frame = make_frame(cfg.k0, omega, tau=cfg.tau, K_max=cfg.K_check)
        dims = cfg.n + 1
        # the potential lives on the resonant angle: first frame coordinate
        entries = {(k[0],) + (0,) * cfg.n: c for k, c in cfg.potential.items()}
        cut = (cfg.potential.cutoffs[0],) + (0,) * cfg.n
        pot = FourierTable.from_modes(entries, cut, symmetrize=False)
        Binv = np.rint(np.linalg.inv(np.asarray(B, float))).astype(int)
        H1 = change_angles(pot, Binv)
        Q0 = np.eye(dims) if cfg.Q0 is None else cfg.Q0
        H = localize_and_scale({"omega": omega, "Q0": Q0}, H1, frame, eps, R0=cfg.R0)
        if cfg.mu:
            terms = dict(H.terms)
            for m, t in cfg.perturbation.terms.items():
                add = t * cfg.mu
                terms[m] = terms[m] + add if m in terms else add
            H = MomentumJet(dims, terms, H.remainder_bound)
        Qn = np.asarray(B, float) @ Q0 @ np.asarray(B, float).T
        R0 = float(Qn[0, 0]) if cfg.R0 is None else cfg.R0
        Q1 = Qn / R0
        theta = Q1[0, 1:] / Q1[0, 0]
        freq = Frequency.build(np.asarray(frame.omega0.omega) / math.sqrt(eps * R0), tau=cfg.tau,
                               K_max=cfg.K_check)
    except (NormalFormError, HomologicalError) as exc:
        raise StageError("normalform", str(exc)) from None
    try:
        H_nu, _, rep = average_out(H, freq, cfg.delta0)
    except (NormalFormError, HomologicalError) as exc:
        raise StageError("normalform", str(exc)) from None
    try:
        sep = build_separatrix(rep.U, cfg.domain_halfwidth)
    except SeparatrixError as exc:
        raise StageError("separatrix", str(exc)) from None
    return Model(eps, frame, H, H_nu, freq, sep, theta, rep)


def _kam_runs(cfg: ExperimentConfig, model: Model, threads: int = 1) -> dict:
    jobs = []
    for beta in ("+", "-"):
        au, as_ = _ray_angles(beta, cfg.zeta)
        jobs.append((beta, "unstable", au))
        jobs.append((beta, "stable", as_))

    def one(job):
        beta, chart, alpha = job
        pr = KamProblem(model.H_nu, model.freq, model.sep, chart, alpha, cfg.N_ray, cfg.K,
                        model.theta if np.any(model.theta) else None)
        return kam_iterate(pr, max_iter=cfg.max_iter)

    try:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
            results = list(ex.map(one, jobs))
    except KamError as exc:
        raise StageError("kam", str(exc)) from None
    runs = {}
    for (beta, chart, _), res in zip(jobs, results):
        runs.setdefault(beta, {})[chart] = res
    return {b: ManifoldRuns(b, cfg.zeta, r["unstable"], r["stable"]) for b, r in runs.items()}


def _budget(model: Model, cfg: ExperimentConfig):
    st = model.sep.strip
    return st.rho - cfg.delta, st.sigma2 - cfg.delta


def run_split(cfg: ExperimentConfig, eps: float, threads: int = 1):
    model = build_model(cfg, eps)
    runs = _kam_runs(cfg, model, threads)
    xis = [np.real(r.xi) for m in runs.values() for r in (m.unstable, m.stable)]
    spread = max(float(np.abs(a - b).max(initial=0.0)) for a in xis for b in xis)
    if spread > cfg.tolerances["exactness"]:
        raise StageError("split", f"exactness violation: xi differs by {spread:.3e}")
    rho_p, sig_p = _budget(model, cfg)
    try:
        rep, lines = analyze_splitting(runs, rho_p, sig_p, Nt=cfg.Nt, seeds=cfg.seeds)
    except SplittingError as exc:
        raise StageError("split", str(exc)) from None
    return model, runs, rep, lines


def checks(cfg: ExperimentConfig, model: Model, runs: dict, rep) -> dict:
    """Configured invariant checks; values are ``(passed, measured)``."""
    out = {}
    res = max(hj_residual(r) for m in runs.values() for r in (m.unstable, m.stable))
    out["hj_residual"] = (res < cfg.tolerances["residual"], res)
    out["xi_mismatch"] = (rep.xi_mismatch < cfg.tolerances["exactness"], rep.xi_mismatch)
    out["c0_mismatch"] = (rep.c0_mismatch < cfg.tolerances["exactness"], float(rep.c0_mismatch))
    slack = min((v for f in rep.decay_fit.values() for v in f.slack.values()), default=0.0)
    out["decay_slack"] = (slack >= -cfg.tolerances["decay_slack"], float(slack))
    if any(rep.coeffs.values()):
        ok = all(len(v) >= cfg.n + 1 for v in rep.critical_points.values()) and rep.n_critical >= 2 * cfg.n + 2
        out["critical_points"] = (ok, rep.n_critical)
    return out


# ---------------------------------------------------------------- serialization
def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return json.dumps(str(v))
        return "%.17g" % v
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        items = sorted((str(k), x) for k, x in v.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_fmt(x)}" for k, x in items) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v)) + "]"
    if isinstance(v, complex):
        return _fmt([v.real, v.imag])
    raise TypeError(f"cannot serialize {type(v).__name__}")


def emit_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats as ``%.17g``."""
    return _fmt(obj) + "\n"


def emit_report(report: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return emit_json(report)
    if fmt == "csv":
        rows = report["rows"]
        cols = report["columns"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow(["%.17g" % x if isinstance(x, float) else x for x in (r[c] for c in cols)])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(text: str) -> dict:
    return json.loads(text)


def manifold_dict(runs: dict) -> dict:
    out = {}
    for beta, m in runs.items():
        for res in (m.unstable, m.stable):
            pr = res.problem
            S, xi, c0, b0 = pr.unpack(res.u)
            out[f"{beta}/{pr.chart}"] = {
                "chart": pr.chart, "alpha": pr.alpha, "N": pr.ray.N, "r_max": pr.ray.r1, "K": pr.K,
                "xi": np.real(xi).tolist(), "c0": [float(np.real(c0)), float(np.imag(c0))],
                "c1": res.psi.c1, "b0": {"re": np.real(b0).tolist(), "im": np.imag(b0).tolist()},
                "S_hat": {"re": np.real(S).tolist(), "im": np.imag(S).tolist()},
                "stop_reason": res.diag.stop_reason,
            }
    return out


def diag_rows(runs: dict):
    rows = []
    for beta, m in runs.items():
        for res in (m.unstable, m.stable):
            name = f"{beta}/{res.problem.chart}"
            rows.append({"run": name, "j": 0, "mu": res.diag.mu0, "nu": float("nan"), "lambda": res.problem.wh.lam,
                         "M": float(np.abs(res.problem.A).max()), "R": float("nan"), "residual": res.diag.mu0})
            for r in res.diag.records:
                rows.append({"run": name, "j": r.j, "mu": r.mu, "nu": r.nu, "lambda": r.lam, "M": r.M, "R": r.R,
                             "residual": r.residual})
    return rows


DIAG_COLUMNS = ["j", "mu", "nu", "lambda", "M", "R", "residual"]


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------- subcommands
def cmd_validate(cfg, args):
    summary = {"n": cfg.n, "k0": list(cfg.k0), "eps_list": list(cfg.eps_list), "valid": True,
               "frequency": list(model_frequency(cfg, cfg.eps_list[0]).omega)}
    _emit_out(args, emit_json(summary))
    return 0


def _potential_from(args, cfg):
    if args.potential:
        try:
            return FourierTable.from_dict(json.loads(Path(args.potential).read_text()))
        except (OSError, json.JSONDecodeError, SeriesError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError([f"potential: {exc}"]) from None
    if cfg is None:
        raise ConfigError(["timemap: needs --potential or --config"])
    return cfg.potential


def cmd_timemap(cfg, args):
    U = _potential_from(args, cfg)
    try:
        sep = build_separatrix(U, cfg.domain_halfwidth if cfg else 3.0)
    except SeparatrixError as exc:
        raise StageError("separatrix", str(exc)) from None
    n = args.samples
    xs = np.linspace(0.1, 2 * np.pi - 0.1, n)
    s = np.real(time_map(sep, xs))
    rows = [{"x": float(a), "s": float(b), "chi": float(np.real(chi(sep, np.array([b]))[0])),
             "psi": float(np.real(sep.psi_at(np.array([a]))[0]))} for a, b in zip(xs, s)]
    _emit_out(args, emit_report({"columns": ["x", "s", "chi", "psi"], "rows": rows}, "csv"))
    log.info("lambda %.17g, rho %.17g, sigma2 %.17g", sep.lam, sep.strip.rho, sep.strip.sigma2)
    return 0


def _load_json(path, what):
    if not path:
        raise ConfigError([f"{what}: missing"])
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{what}: {exc}"]) from None


def _freq_from(d) -> Frequency:
    extra = set(d) - {"omega", "tau", "K_max"}
    if extra or "omega" not in d:
        raise ConfigError([f"freq: expected fields omega, tau, K_max (got {sorted(d)})"])
    try:
        return Frequency.build(d["omega"], tau=d.get("tau"), K_max=int(d.get("K_max", 32)))
    except HomologicalError as exc:
        raise ConfigError([f"freq: {exc}"]) from None


def cmd_homological(cfg, args):
    """Single solver call on JSON input; ``--residual`` reports the defect on stderr."""
    freq = _freq_from(_load_json(args.freq, "--freq"))
    raw = _load_json(args.input, "--in")
    lam = args.lam
    try:
        if args.op == "cauchy":
            extra = set(raw) - {"modes", "rho_prime", "s"}
            if extra:
                raise ConfigError([f"--in: unknown fields {sorted(extra)}"])
            modes = {}
            for m in raw["modes"]:
                c = np.array([complex(a, b) for a, b in m["taylor"]])
                modes[tuple(m["k"])] = (lambda cc: (lambda t: np.polyval(cc[::-1], t)))(c)
            s = np.array(raw["s"], float)
            out = hom.solve_cauchy(modes, lam, freq.vec, float(raw["rho_prime"]), s)
            res = {",".join(map(str, k)): [[float(v.real), float(v.imag)] for v in vals] for k, vals in out.items()}
            payload = {"s": s.tolist(), "u": res}
            defect = _cauchy_defect(modes, out, lam, freq.vec, s) if args.residual else None
        else:
            v = FourierTable.from_dict(raw)
            if args.op == "domega":
                u = hom.solve_Domega(v, freq)
                payload = u.to_dict()
                defect = _domega_defect(u, v, freq) if args.residual else None
            elif args.op == "shifted":
                u = hom.solve_shifted(v, lam, freq)
                payload = u.to_dict()
                defect = _domega_defect(u, v, freq, -lam) if args.residual else None
            else:
                U = _potential_from(args, cfg) if (args.potential or cfg) else None
                sep = build_separatrix(U if U is not None else _pendulum())
                sol, c = hom.solve_transport(v, lam, freq, sep)
                payload = {"c": c, "u_torus": sol.u_torus.to_dict(), "ray": sol.field.ray.r.tolist(),
                           "values": {"re": np.real(sol.field.values).tolist(),
                                      "im": np.imag(sol.field.values).tolist()}}
                defect = sol.residual() if args.residual else None
    except (HomologicalError, SeriesError, SeparatrixError, KeyError, TypeError, ValueError) as exc:
        raise StageError("homological", str(exc)) from None
    _emit_out(args, emit_json(payload))
    if defect is not None:
        sys.stderr.write("residual %.6e\n" % defect)
    return 0


def _pendulum():
    from .separatrix import pendulum_potential
    return pendulum_potential()


def _domega_defect(u, v, freq, shift=0.0):
    from .series import differentiate
    back = u * shift
    for j, w in enumerate(freq.omega):
        back = back + differentiate(u, j) * w
    return float(np.abs((back - v).coeffs).max())


def _cauchy_defect(modes, out, lam, omega, s):
    # centred differences on the sampled points: a rough but independent check
    worst = 0.0
    for k, vals in out.items():
        kap = float(np.dot(k, omega))
        if len(s) < 3:
            continue
        du = np.gradient(vals, s)
        worst = max(worst, float(np.abs(lam * du + 1j * kap * vals - modes[k](s))[1:-1].max()))
    return worst


def cmd_normalform(cfg, args):
    model = build_model(cfg, cfg.eps_list[0])
    rep = model.averaging
    out = {"eps": model.eps, "omega1": list(model.freq.omega), "theta": model.theta.tolist(),
           "lambda": model.sep.lam, "rho": model.sep.strip.rho, "sigma2": model.sep.strip.sigma2,
           "U": rep.U.to_dict(), "dS_norm": rep.dS_norm, "f_norm": rep.f_norm, "g_norm": rep.g_norm,
           "H_nu": model.H_nu.to_dict()}
    _emit_out(args, emit_json(out))
    return 0


def cmd_kam(cfg, args):
    model = build_model(cfg, cfg.eps_list[0])
    pr = KamProblem(model.H_nu, model.freq, model.sep, "unstable", 0.0, cfg.N_ray, cfg.K,
                    model.theta if np.any(model.theta) else None)
    try:
        res = kam_iterate(pr, max_iter=cfg.max_iter)
    except KamError as exc:
        raise StageError("kam", str(exc)) from None
    runs = {"+": ManifoldRuns("+", 0.0, res, res)}
    man = manifold_dict(runs)
    man = {"unstable": man["+/unstable"], "hj_residual": hj_residual(res)}
    _emit_out(args, emit_json(man))
    rows = [r for r in diag_rows(runs) if r["run"] == "+/unstable"][: len(res.diag.records) + 1]
    path = Path(args.diagnostics) if args.diagnostics else _sibling(args, "diag.csv")
    if path is not None:
        _write(path, emit_report({"columns": DIAG_COLUMNS, "rows": rows}, "csv"))
    ok = hj_residual(res) < cfg.tolerances["residual"]
    if not ok:
        log.error("stage kam: hj_residual above tolerance")
    return 0 if ok else 1


def _sibling(args, name):
    if args.out in (None, "-"):
        return None
    return Path(args.out).parent / name


def cmd_split(cfg, args):
    eps = cfg.eps_list[0]
    model, runs, rep, lines = run_split(cfg, eps, args.threads)
    chk = checks(cfg, model, runs, rep)
    report = rep.to_dict()
    report["eps"] = eps
    report["checks"] = {k: {"passed": bool(v[0]), "value": v[1]} for k, v in chk.items()}
    report["melnikov"] = _melnikov_summary(cfg, model, rep)
    _emit_out(args, emit_json(report))
    man = _sibling(args, "manifold.json")
    if man is not None:
        _write(man, emit_json(manifold_dict(runs)))
        _write(_sibling(args, "diag.csv"),
               emit_report({"columns": ["run"] + DIAG_COLUMNS, "rows": diag_rows(runs)}, "csv"))
    if args.figures:
        from .figures import split_figures
        split_figures(Path(args.figures), runs, rep, lines)
    failed = [k for k, v in chk.items() if not v[0]]
    for k in failed:
        log.error("stage split: check %s failed (value %s)", k, chk[k][1])
    return 1 if failed else 0


def _melnikov_summary(cfg, model, rep):
    """First-order comparison for momentum-free perturbations."""
    zero = (0,) * (cfg.n + 1)
    if not cfg.mu or set(cfg.perturbation.terms) != {zero}:
        return {}
    M = melnikov_oracle(cfg.perturbation.terms[zero] * cfg.mu, model.sep, model.freq, model.theta)
    out = {}
    for beta, coeffs in rep.coeffs.items():
        common = [k for k in coeffs if k in M and abs(M[k]) > 0]
        if common:
            out[beta] = max(abs(coeffs[k] - M[k]) / abs(M[k]) for k in common)
    return out


def cmd_sweep(cfg, args):
    rows = []
    fits = []
    for eps in cfg.eps_list:
        model, runs, rep, _ = run_split(cfg, eps, args.threads)
        fit = rep.decay_fit["+"]
        lam = model.sep.lam
        om = model.freq.vec
        for k in sorted(fit.slack):
            kap = float(np.dot(k, om))
            rhs = -abs(kap) / lam * fit.rho_prime - sum(abs(v) for v in k) * fit.sigma_prime \
                + math.log(fit.norm) + fit.bound_constant
            row = {"eps": eps, "abs_coeff": abs(fit.coeffs[k]), "bound_rhs": rhs, "slack": float(fit.slack[k]),
                   "xi_mismatch": rep.xi_mismatch, "c0_mismatch": float(rep.c0_mismatch),
                   "n_critical": rep.n_critical}
            for j, v in enumerate(k):
                row[f"mode_k{j + 1}"] = int(v)
            rows.append(row)
        e1 = (1,) + (0,) * (cfg.n - 1)
        if e1 in fit.coeffs:
            fits.append((eps ** -0.5, math.log(abs(fit.coeffs[e1])), fit.rho_prime, lam))
    cols = ["eps"] + [f"mode_k{j + 1}" for j in range(cfg.n)] + ["abs_coeff", "bound_rhs", "slack", "xi_mismatch",
                                                                 "c0_mismatch", "n_critical"]
    _emit_out(args, emit_report({"columns": cols, "rows": rows}, "csv"))
    if len(fits) >= 2:
        x, y = np.array([f[0] for f in fits]), np.array([f[1] for f in fits])
        slope = -float(np.polyfit(x, y, 1)[0])
        pred = predicted_exponent(cfg, fits[-1][2], fits[-1][3])
        log.info("decay exponent %.6g, predicted %.6g, ratio %.4f", slope, pred, slope / pred)
        if args.figures:
            from .figures import sweep_figure
            sweep_figure(Path(args.figures), x, y, slope, pred)
    return 0


def predicted_exponent(cfg: ExperimentConfig, rho_prime: float, lam: float) -> float:
    """``rho' |omega0| / (lam sqrt(R0))`` for the first rotator mode."""
    _, B = _full_omega(cfg)
    Q0 = np.eye(cfg.n + 1) if cfg.Q0 is None else cfg.Q0
    Qn = np.asarray(B, float) @ Q0 @ np.asarray(B, float).T
    R0 = float(Qn[0, 0]) if cfg.R0 is None else cfg.R0
    return rho_prime * abs(cfg.omega0[0]) / (lam * math.sqrt(R0))


def _emit_out(args, text):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        _write(Path(args.out), text)


COMMANDS = {
    "validate": cmd_validate, "timemap": cmd_timemap, "homological": cmd_homological,
    "normalform": cmd_normalform, "kam": cmd_kam, "split": cmd_split, "sweep-eps": cmd_sweep,
}
NEEDS_CONFIG = {"validate", "normalform", "kam", "split", "sweep-eps"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON")
    common.add_argument("--out", default="-", help="output file (default stdout)")
    common.add_argument("--threads", type=int, default=1, help="concurrent KAM runs")
    common.add_argument("--log-level", choices=["info", "debug"], default="info")
    common.add_argument("--figures", default=None, metavar="DIR", help="render PNG figures into DIR")
    p = argparse.ArgumentParser(prog="hjsplit", description="Whisker splitting at a simple resonance.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("validate", "normalform", "split", "sweep-eps"):
        sub.add_parser(name, parents=[common])
    k = sub.add_parser("kam", parents=[common])
    k.add_argument("--diagnostics", default=None, help="diag.csv path")
    t = sub.add_parser("timemap", parents=[common])
    t.add_argument("--potential", default=None, help="FourierTable JSON of the potential")
    t.add_argument("--samples", type=int, default=65)
    h = sub.add_parser("homological", parents=[common])
    h.add_argument("--op", required=True, choices=["domega", "transport", "shifted", "cauchy"])
    h.add_argument("--in", dest="input", required=True, help="right-hand side JSON")
    h.add_argument("--freq", required=True, help="frequency JSON {omega, tau, K_max}")
    h.add_argument("--lambda", dest="lam", type=float, default=1.0)
    h.add_argument("--potential", default=None, help="potential for the transport operator (pendulum if absent)")
    h.add_argument("--residual", action="store_true", help="print the verification residual on stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.log_level == "debug" else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    cfg = None
    try:
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text())
            except FileNotFoundError:
                raise ConfigError([f"config: file not found: {args.config}"]) from None
            except json.JSONDecodeError as exc:
                raise ConfigError([f"config: invalid JSON: {exc}"]) from None
            cfg = validate(raw, Path(args.config).parent)
        elif args.command in NEEDS_CONFIG:
            raise ConfigError([f"{args.command}: --config is required"])
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        for q in exc.problems:
            log.error("stage config: %s", q)
        return 2
    except StageError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
