"""Batch front door: config files in, reports and CSV tables out.

Subcommands map onto the verification ladder for one model (a diffusion
spec or an explicit reversible chain): classification, spectrum, QSD
construction, fixed-point verification, transformed-generator checks,
tightness profiles, and the Monte Carlo cross-checks.  ``all`` runs the
ladder in dependency order, keeps going on contract failures, and
aggregates.

Exit codes: 0 success, 1 malformed input, 2 violated mathematical contract
(also used when a result misses its tolerance).  Reports embed the
tolerances used and a config digest; rerunning the same config and seed
reproduces the report byte for byte apart from the isolated timestamp line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from .diffusion import (
    Diffusion1D, build_grid, discretize, endpoint_report, is_class_T,
    qsd_density, tightness_profile,
)
from .montecarlo import (
    PathConfig, doob_paths, exp_zeta_moment_estimate, simulate_killed_paths,
    yaglom_estimate,
)
from .reports import ToleranceProfile, config_digest, write_report, write_series
from .spectral import (
    conditional_law, doob_spectral_gap, doob_transform, exp_lifetime_moment,
    principal_eigenpair, qsd, semigroup_intertwining_check, spectral_gap,
    uniqueness_check, validate_generator,
)
from .stats import mann_kendall

SUBCOMMANDS = ("classify", "spectrum", "qsd", "verify-qsd", "doob-check",
               "tightness", "yaglom", "moments", "all")
_LADDER = ("classify", "spectrum", "qsd", "verify-qsd", "doob-check",
           "tightness", "yaglom", "moments")


class _Problem:
    """Parsed config plus lazily built model objects shared across steps."""

    def __init__(self, config: dict, tolerances: ToleranceProfile):
        self.config = config
        self.tol = tolerances
        kind = config.get("kind")
        if kind not in ("diffusion", "chain"):
            raise errors.ConfigParse(f"kind must be 'diffusion' or 'chain', got {kind!r}")
        self.kind = kind
        self.d = Diffusion1D.from_json(config["diffusion"]) if kind == "diffusion" else None
        if kind == "chain":
            gen_payload = config.get("generator")
            if not isinstance(gen_payload, dict):
                raise errors.ConfigParse("chain config needs a 'generator' object")
            try:
                Q = np.asarray(gen_payload["Q"], dtype=np.float64)
                m = np.asarray(gen_payload["m"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise errors.ConfigParse(f"generator payload invalid: {exc}") from exc
            self._chain = validate_generator(Q, m)
        self._cache: dict = {}

    def require_diffusion(self, what: str) -> Diffusion1D:
        if self.d is None:
            raise errors.ConfigParse(f"{what} requires a diffusion model, not a chain")
        return self.d

    @property
    def grid_n(self) -> int:
        return int(self.config.get("grid", {}).get("n", 400))

    def grid(self):
        if "grid" not in self._cache:
            cutoff = float(self.config.get("grid", {}).get("cutoff_scale", 1.0))
            self._cache["grid"] = build_grid(self.require_diffusion("grid"),
                                            self.grid_n, cutoff_scale=cutoff)
        return self._cache["grid"]

    def generator(self):
        if self.kind == "chain":
            return self._chain
        if "generator" not in self._cache:
            self._cache["generator"] = discretize(self.d, self.grid())
        return self._cache["generator"]

    def path_config(self, overrides_key: str | None = None) -> PathConfig:
        mc = self.config.get("mc")
        if not isinstance(mc, dict):
            raise errors.ConfigParse("this subcommand needs an 'mc' config block")
        if overrides_key is not None:
            mc = {**mc, **self.config.get(overrides_key, {})}
        try:
            return PathConfig(
                dt=float(mc["dt"]), horizon=float(mc["horizon"]),
                n_paths=int(mc["n_paths"]), seed=int(mc.get("seed", 0)),
                bridge_correction=bool(mc.get("bridge_correction", True)),
            )
        except KeyError as exc:
            raise errors.ConfigParse(f"mc block missing field {exc}") from exc


def _step_classify(p: _Problem, out: Path):
    d = p.require_diffusion("classify")
    sides = {}
    for side in ("left", "right"):
        rep = endpoint_report(d, side)
        sides[side] = {
            "endpoint": rep.endpoint,
            "class": rep.boundary_class.value,
            "attainability_finite": rep.attainability.finite,
            "entrance_finite": rep.entrance.finite,
            "method": rep.attainability.method,
        }
    ct = is_class_T(d)
    return {
        "left": sides["left"], "right": sides["right"],
        "class_T": ct.class_T, "explosive": ct.explosive,
        "killing_present": ct.killing_present,
        "absorbing_end_present": ct.absorbing_end_present,
    }, []


def _step_spectrum(p: _Problem, out: Path):
    g = p.generator()
    pair = principal_eigenpair(g)
    rep = uniqueness_check(g)
    rates = rep.decay_rates[: min(10, len(rep.decay_rates))]
    write_series(out / "spectrum.csv", [(k, r, None) for k, r in enumerate(rates)],
                 header=("t", "value", "stderr"))
    return {
        "n": g.n, "lambda0": pair.lambda0, "gap": spectral_gap(g),
        "phi0_min": float(np.min(pair.phi0)), "phi0_max": float(np.max(pair.phi0)),
        "nonnegative_left_eigenvectors": rep.nonnegative_count,
    }, []


def _step_qsd(p: _Problem, out: Path):
    if p.kind == "chain":
        nu = qsd(p.generator())
        write_series(out / "qsd.csv", [(k, v, None) for k, v in enumerate(nu.nu)],
                     header=("t", "value", "stderr"))
        return {"mass": float(nu.nu.sum()), "support": int(np.count_nonzero(nu.nu > 0))}, []
    dq = qsd_density(p.d, p.grid())
    p._cache["qsd_density"] = dq
    write_series(out / "qsd.csv", [(x, v, None) for x, v in zip(dq.x, dq.density)],
                 header=("t", "value", "stderr"))
    return {
        "lambda0": dq.lambda0, "mass": float(dq.nu.nu.sum()),
        "density_peak": float(np.max(dq.density)),
    }, []


def _step_verify_qsd(p: _Problem, out: Path):
    g = p.generator()
    nu = qsd(g)
    resid = 0.0
    for t in (0.1, 1.0, 10.0):
        resid = max(resid, float(np.max(np.abs(conditional_law(g, nu.nu, t).nu - nu.nu))))
    rep = uniqueness_check(g)
    results = {
        "lambda0": principal_eigenpair(g).lambda0,
        "invariance_residual": resid,
        "uniqueness_count": rep.nonnegative_count,
        "uniqueness_qsd_error": rep.qsd_error,
    }
    violations = []
    if resid > p.tol.invariance:
        violations.append(f"invariance residual {resid:.3g} > {p.tol.invariance:g}")
    if rep.nonnegative_count != 1:
        violations.append(f"{rep.nonnegative_count} nonnegative left eigenvectors")
    if rep.qsd_error > p.tol.invariance:
        violations.append(f"uniqueness qsd error {rep.qsd_error:.3g} > {p.tol.invariance:g}")
    return results, violations


def _step_doob_check(p: _Problem, out: Path):
    g = p.generator()
    dg = doob_transform(g)
    rowsum = float(np.max(np.abs(dg.Qh.sum(axis=1))))
    w = dg.mh[:, None] * dg.Qh
    db = float(np.max(np.abs(w - w.T)))
    scale = float(np.max(np.abs(dg.Qh)))
    pair = principal_eigenpair(g)
    if p.kind == "diffusion":
        f = p.grid().interior.copy()
        f /= max(1.0, np.max(np.abs(f)))
    else:
        f = np.linspace(0.0, 1.0, g.n)
    resid = semigroup_intertwining_check(g, pair, 3.0, f)
    results = {
        "rowsum_sup": rowsum, "detailed_balance_defect": db,
        "intertwining_residual_t3": resid, "doob_gap": doob_spectral_gap(dg),
        "scale": scale,
    }
    violations = []
    if rowsum > p.tol.doob_rowsum * max(1.0, scale):
        violations.append(f"rowsum {rowsum:.3g} > {p.tol.doob_rowsum:g} * scale")
    if db > p.tol.detailed_balance * max(1.0, scale):
        violations.append(f"detailed balance defect {db:.3g} > {p.tol.detailed_balance:g} * scale")
    if resid > p.tol.intertwining:
        violations.append(f"intertwining residual {resid:.3g} > {p.tol.intertwining:g}")
    return results, violations


def _step_tightness(p: _Problem, out: Path):
    g = p.generator()
    order = np.argsort(-g.m)
    quantiles = (0.5, 0.75, 0.9, 0.99)
    sups, rows = [], []
    total = g.m.sum()
    for qv in quantiles:
        csum = np.cumsum(g.m[order])
        count = int(np.searchsorted(csum, qv * total)) + 1
        K = np.zeros(g.n, dtype=bool)
        K[order[:count]] = True
        sup = tightness_profile(g, K).sup
        sups.append(sup)
        rows.append((qv, sup, None))
    write_series(out / "tightness.csv", rows, header=("t", "value", "stderr"))
    results = {"quantiles": list(quantiles), "sups": sups,
               "monotone": bool(np.all(np.diff(sups) <= 1e-12))}
    violations = [] if results["monotone"] else ["tightness sup not monotone in K"]
    return results, violations


def _step_yaglom(p: _Problem, out: Path):
    d = p.require_diffusion("yaglom")
    cfg = p.path_config()
    dq = p._cache.get("qsd_density") or qsd_density(d, p.grid())
    times = tuple(p.config.get("times", (0.25, 0.5, 1.0, 2.0)))
    x0 = p.config.get("x0")
    est = yaglom_estimate(d, x0, cfg, dq, times)
    write_series(out / "yaglom.csv",
                 list(zip(est.times, est.tv_distance, est.ci_halfwidth)))
    _, _, p_dec = mann_kendall(est.tv_distance)
    finite = np.isfinite(est.tv_distance)
    results = {
        "times": list(est.times),
        "tv": list(est.tv_distance), "ci": list(est.ci_halfwidth),
        "survivors": [int(s) for s in est.survivors],
        "mann_kendall_p_decreasing": p_dec,
        "backend": est.ensemble.backend,
    }
    violations = []
    if x0 is not None and np.count_nonzero(finite) >= 2:
        tvs = est.tv_distance[finite]
        cis = est.ci_halfwidth[finite]
        if not tvs[-1] + cis[-1] < tvs[0] - cis[0]:
            violations.append("TV at the last time not below the first outside CIs")
    return results, violations


def _spectral_moment_at(g, grid, gamma: float, x: float) -> float:
    """Moment at an off-node start, linear between the bracketing states."""
    nodes = grid.interior
    j = int(np.clip(np.searchsorted(nodes, x), 1, g.n - 1))
    lo, hi = nodes[j - 1], nodes[j]
    w = 0.0 if hi == lo else float(np.clip((x - lo) / (hi - lo), 0.0, 1.0))
    vlo = exp_lifetime_moment(g, gamma, j - 1)
    vhi = exp_lifetime_moment(g, gamma, j)
    return (1.0 - w) * vlo + w * vhi


def _step_moments(p: _Problem, out: Path):
    g = p.generator()
    pair = principal_eigenpair(g)
    lam = pair.lambda0
    if p.kind == "diffusion":
        x_ref = float(p.config.get("x0", p.d.anchor))
        x_state = int(np.argmin(np.abs(p.grid().interior - x_ref)))
    else:
        x_ref, x_state = 0.0, 0
    rows, spectral_vals = [], {}
    for frac in (0.25, 0.5, 0.75, 0.9):
        val = exp_lifetime_moment(g, frac * lam, x_state)
        spectral_vals[f"{frac:g}"] = val
        rows.append((frac * lam, val, None))
    write_series(out / "moments.csv", rows, header=("t", "value", "stderr"))
    results = {"lambda0": lam, "state_index": x_state, "spectral": spectral_vals}
    violations = []
    if p.kind == "diffusion" and isinstance(p.config.get("mc"), dict):
        cfg = p.path_config("mc_moments")
        ens = simulate_killed_paths(p.d, x_ref, cfg)
        gamma = 0.25 * lam
        est = exp_zeta_moment_estimate(ens, gamma)
        oracle = _spectral_moment_at(g, p.grid(), gamma, x_ref)
        z = abs(est.value - oracle) / est.stderr if est.stderr > 0 else np.inf
        results["mc"] = {
            "gamma": gamma, "value": est.value, "stderr": est.stderr,
            "oracle": oracle, "z": z,
            "censored_fraction": est.censored_fraction,
            "backend": ens.backend,
        }
        if z > 3.0:
            violations.append(f"MC moment z-score {z:.2f} > 3 against the spectral oracle")
    return results, violations


_STEPS = {
    "classify": _step_classify,
    "spectrum": _step_spectrum,
    "qsd": _step_qsd,
    "verify-qsd": _step_verify_qsd,
    "doob-check": _step_doob_check,
    "tightness": _step_tightness,
    "yaglom": _step_yaglom,
    "moments": _step_moments,
}


def _run_step(name: str, p: _Problem, out: Path, base: dict) -> tuple[dict, int]:
    """Execute one step; returns (report dict, exit code)."""
    try:
        results, violations = _STEPS[name](p, out)
        status = "ok" if not violations else "contract_violation"
        code = 0 if not violations else 2
        report = {**base, "subcommand": name, "status": status,
                  "results": results, "violations": violations}
    except errors.QsdLabError as exc:
        report = {**base, "subcommand": name, "status": "error",
                  "error": {"code": exc.code, "message": str(exc),
                            "details": {k: repr(v) for k, v in exc.details.items()}}}
        code = exc.exit_code
    return report, code


def run(subcommand: str, config_path: str, seed=None, grid_n=None, dt=None,
        paths=None, out=None, tolerance_profile: str = "default") -> int:
    if subcommand not in SUBCOMMANDS:
        print(json.dumps({"error": "UnknownSubcommand", "subcommand": subcommand}),
              file=sys.stderr)
        return errors.UnknownSubcommand("unknown subcommand").exit_code
    try:
        try:
            config = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.ConfigParse(f"cannot read config: {exc}") from exc
        if not isinstance(config, dict):
            raise errors.ConfigParse("config root must be a JSON object")
        if seed is not None:
            config.setdefault("mc", {})["seed"] = seed
        if grid_n is not None:
            config.setdefault("grid", {})["n"] = grid_n
        if dt is not None:
            config.setdefault("mc", {})["dt"] = dt
        if paths is not None:
            config.setdefault("mc", {})["n_paths"] = paths
        out_dir = Path(out if out is not None else config.get("output", "qsd_lab_out"))
        tol = ToleranceProfile.named(tolerance_profile)
        problem = _Problem(config, tol)
    except errors.QsdLabError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(json.dumps({"error": "ConfigParse", "message": str(exc)}), file=sys.stderr)
        return 1

    from . import __version__

    base = {
        "version": __version__,
        "config_digest": config_digest(config),
        "seed": config.get("mc", {}).get("seed", 0),
        "tolerances": tol,
    }

    if subcommand != "all":
        report, code = _run_step(subcommand, problem, out_dir, base)
        write_report(out_dir / "report.json", report)
        if code != 0:
            print(json.dumps({"error": report.get("error", {}).get("code", "ToleranceViolation"),
                              "subcommand": subcommand}), file=sys.stderr)
        return code

    steps = [s for s in _LADDER
             if not (problem.kind == "chain" and s in ("classify", "yaglom"))]
    if not isinstance(config.get("mc"), dict):
        steps = [s for s in steps if s not in ("yaglom",)]
    children, codes = {}, []
    for name in steps:
        report, code = _run_step(name, problem, out_dir / name, base)
        write_report(out_dir / name / "report.json", report)
        children[name] = {"status": report["status"], "exit_code": code}
        codes.append(code)
    overall = max(codes) if codes else 0
    write_report(out_dir / "report.json",
                 {**base, "subcommand": "all",
                  "status": "ok" if overall == 0 else "partial_failure",
                  "steps": children})
    return overall


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qsd-lab",
        description="Quasi-stationary analysis of killed diffusions and reversible chains",
    )
    parser.add_argument("subcommand", help="one of: " + ", ".join(SUBCOMMANDS))
    parser.add_argument("config", help="problem config JSON file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--grid-n", type=int, default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--paths", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--tolerance-profile", choices=("default", "strict"),
                        default="default")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is an input error in our scheme
        return 0 if exc.code in (0, None) else 1
    return run(args.subcommand, args.config, seed=args.seed, grid_n=args.grid_n,
               dt=args.dt, paths=args.paths, out=args.out,
               tolerance_profile=args.tolerance_profile)


if __name__ == "__main__":
    sys.exit(main())
