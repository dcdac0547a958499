"""Experiment pipeline behind the command line: generate, tune, sample, diagnose, compare.

Every command reads an :class:`~fsmcmc.config.ExperimentConfig` and writes
into ``config.output_dir``::

    data.h5                 truth and observations
    operator.h5             tuned weight operator (+ curvature for H)
    chains/chain-XXX.h5     one record per chain
    report/diagnostics.csv  per-mode IACT, ESS, PSRF, moments
    report/acf.csv          chain-averaged autocorrelation curves
    report/relerr.csv       relative error of running mean and variance
    report/summary.json
    compare.csv             (compare) ESS side by side
    sweep.csv, verify.csv   (analytic1d)

Outputs embed the config hash and master seed and contain no timestamps or
paths, so a re-run with the same config reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path

import numpy as np
import yaml

from . import analytic1d as a1d
from . import io
from .config import ExperimentConfig, load_config
from .curvature import choose_rank, gauss_newton_operator, lowrank_eigs
from .diagnostics import acf, ar1_reference_acf, iact, psrf, relative_error_curve
from .heat import HeatModel
from .mcmc import AdaptationSchedule, ChainTask, Potential, Recorder, run_chain, run_ensemble, substream
from .navier_stokes import NavierStokesModel, NSConfig
from .proposals import build_B_hessian, build_B_scalar, build_B_truncated
from .spectral import sample_gaussian

log = logging.getLogger(__name__)

DEFAULT_NS_MODES = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (1, 4), (4, 1), (3, 3),
                    (5, 5), (1, 8), (1, 11)]


class AdaptationDivergedError(ArithmeticError):
    pass


# -- helpers ------------------------------------------------------------------

def build_model(cfg: ExperimentConfig):
    m = cfg.model
    if m.kind == "heat":
        return HeatModel(K=m.K, prior_scale=m.prior_scale, gamma=m.gamma, time=m.time)
    if m.kind == "ns":
        return NavierStokesModel(NSConfig(viscosity=m.viscosity, dt=m.dt, obs_interval=m.obs_interval,
                                          n_obs=m.n_obs, grid=m.grid, obs_shape=tuple(m.obs_shape),
                                          gamma=m.gamma, forcing=m.forcing, nonlinear=m.nonlinear))
    raise ValueError(f"model kind {m.kind!r} has no forward map")


def recorded_modes(cfg: ExperimentConfig, model) -> list:
    if cfg.recorded_modes is not None:
        return [m if isinstance(m, int) else tuple(m) for m in cfg.recorded_modes]
    if cfg.model.kind == "heat":
        return list(range(1, min(20, model.basis.K) + 1))
    K = model.basis.K
    return [k for k in DEFAULT_NS_MODES if max(map(abs, k)) <= K]


def base_header(cfg: ExperimentConfig, **extra) -> dict:
    return {"config_hash": cfg.hash, "seed": cfg.seed, "name": cfg.name, **extra}


def _out(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir)


def save_run_config(cfg: ExperimentConfig):
    """Store the resolved config (minus its location) next to the outputs."""
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.canonical(), sort_keys=True))


def load_run(path) -> ExperimentConfig:
    """Config of an existing run directory, pointed at that directory."""
    return load_config(Path(path) / "config.yaml").with_output(path)


def _claim(paths, force: bool):
    for p in paths:
        p = Path(p)
        if p.exists() and not force:
            raise FileExistsError(f"{p} exists; pass --force to overwrite")
        p.parent.mkdir(parents=True, exist_ok=True)


def _data_hash(y, truth) -> str:
    h = hashlib.sha256(np.ascontiguousarray(y).tobytes())
    h.update(np.ascontiguousarray(truth.coefficients).tobytes())
    return h.hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_table(path, header: dict, columns: list[str], rows):
    with open(path, "w", newline="") as f:
        for k in sorted(header):
            f.write(f"# {k}: {io.dumps(header[k])}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_table(path) -> tuple[dict, list[dict]]:
    header = {}
    with open(path, newline="") as f:
        lines = f.readlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            k, v = line[2:].rstrip("\n").split(": ", 1)
            header[k] = json.loads(v)
        else:
            body.append(line)
    return header, list(csv.DictReader(body))


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1, default=io._json_default) + "\n")


def load_data(cfg: ExperimentConfig):
    y, truth, header = io.load_observations(_out(cfg) / "data.h5")
    if header.get("config_model") != cfg.model.model_dump(mode="json") or header.get("seed") != cfg.seed:
        raise ValueError("data.h5 was generated with a different model or seed; regenerate it")
    return y, truth, header


# -- commands -------------------------------------------------------------------

def cmd_generate(cfg: ExperimentConfig, force: bool = False) -> Path:
    """Draw a truth from the prior and synthesise noisy observations."""
    model = build_model(cfg)
    path = _out(cfg) / "data.h5"
    _claim([path], force)
    truth = sample_gaussian(model.prior, substream(cfg.seed, "truth"))
    y = model.synthesize_data(truth, substream(cfg.seed, "data"))
    hdr = base_header(cfg, model=cfg.model.kind, gamma=cfg.model.gamma, data_hash=_data_hash(y, truth),
                      config_model=cfg.model.model_dump(mode="json"), observation_dim=len(y))
    io.save_observations(path, y, truth, hdr)
    save_run_config(cfg)
    log.info("wrote %s (%d observations)", path, len(y))
    return path


def _linearization_point(cfg, model, potential, rng) -> np.ndarray:
    dim = model.basis.dim
    if cfg.proposal.linearization == "prior_mean":
        return np.zeros(dim)
    p = cfg.proposal.prelim_steps
    a = cfg.adaptation
    sched = AdaptationSchedule(a.target, p, a.decay, a.beta_min, a.beta_max)
    rec = run_chain(np.zeros(dim), build_B_scalar(cfg.proposal.beta, dim), potential, p, rng,
                    Recorder(model.prior), sched, burn_in=p // 2)
    return rec.production_values().mean(axis=0)


def build_operator(cfg: ExperimentConfig, model, potential, rng):
    """Untuned operator for the configured variant, plus curvature for H."""
    pr = cfg.proposal
    dim = model.basis.dim
    if pr.variant == "O":
        return build_B_scalar(pr.beta, dim), None
    if pr.variant == "C":
        return build_B_truncated(pr.beta, pr.k_c, model.basis), None
    w = _linearization_point(cfg, model, potential, rng)
    gamma = cfg.model.gamma
    probe = min(pr.max_rank if pr.rank is None else max(pr.rank, 1), dim)
    # eigenvalues far below the rank threshold only need absolute accuracy
    atol = 1e-6 * pr.rank_threshold * cfg.zeta * gamma ** 2
    n_probe = pr.n_probe if pr.n_probe is not None else min(dim, probe + max(10, probe // 4))
    curv = lowrank_eigs(gauss_newton_operator(model, model.prior, w), dim, probe, n_probe=n_probe, rng=rng,
                        rtol=pr.eig_rtol, atol=atol, max_iter=pr.eig_max_iter)
    curv.linearization_point = w
    if not curv.converged:
        log.warning("curvature eigensolver did not converge; residual %.3g", curv.residual_estimate)
    if pr.rank is not None:
        r = min(pr.rank, curv.rank)
    else:
        r = choose_rank(curv.eigenvalues, cfg.zeta, gamma, pr.rank_threshold)
        if r == curv.rank:
            log.warning("all %d probed eigenvalues exceed the rank threshold; raise max_rank", r)
    curv = curv.truncate(r)
    curv.meta.update({"zeta": cfg.zeta, "rank": r, "linearization": pr.linearization})
    B = build_B_hessian(pr.beta, cfg.zeta, gamma, curv.eigenvalues, curv.eigenvectors)
    return B, curv


def cmd_tune(cfg: ExperimentConfig, force: bool = False) -> Path:
    """Build the operator, adapt beta on a tuning chain, freeze and save it."""
    model = build_model(cfg)
    y, truth, dhdr = load_data(cfg)
    path = _out(cfg) / "operator.h5"
    _claim([path], force)
    potential = Potential(model, y, cfg.model.gamma, model.prior)
    rng = substream(cfg.seed, "tuning")
    B, curv = build_operator(cfg, model, potential, rng)
    a = cfg.adaptation
    extra = {}
    acc = float("nan")
    if a.enabled and a.n_steps > 0:
        sched = AdaptationSchedule(a.target, a.n_steps, a.decay, a.beta_min, a.beta_max)
        x0 = curv.linearization_point if curv is not None else np.zeros(B.dim)
        rec = run_chain(x0, B, potential, a.n_steps, rng, Recorder(model.prior, recorded_modes(cfg, model)),
                        sched, burn_in=a.n_steps // 2)
        beta = rec.header["beta_final"]
        acc = rec.acceptance_rate
        extra = {"adapt_beta": rec.beta, "adapt_alpha": rec.alpha, "tuned_state": rec.final_state}
        if not np.isfinite(beta) or (beta <= a.beta_min and a.beta_min < a.beta_max):
            raise AdaptationDivergedError(f"beta collapsed to its lower bound {a.beta_min:g}")
        B = B.with_beta(beta)
    hdr = base_header(cfg, data_hash=dhdr["data_hash"], operator=B.describe(), beta=float(B.beta),
                      tuning_acceptance=acc, rank=B.rank)
    io.save_operator(path, B, curv, hdr, extra)
    log.info("tuned %s: beta = %.4g, rank = %d, acceptance %.3f", B.variant, B.beta, B.rank, acc)
    return path


def chain_path(cfg: ExperimentConfig, i: int) -> Path:
    return _out(cfg) / "chains" / f"chain-{i:03d}.h5"


def cmd_sample(cfg: ExperimentConfig, workers: int = 1, force: bool = False) -> list[Path]:
    """Run the chain ensemble with the frozen operator."""
    model = build_model(cfg)
    y, truth, dhdr = load_data(cfg)
    B, curv, extra = io.load_operator(_out(cfg) / "operator.h5")
    ohdr = io.read_header(_out(cfg) / "operator.h5")
    if ohdr.get("config_hash") != cfg.hash:
        raise ValueError("operator.h5 was tuned under a different config; re-run tune")
    paths = [chain_path(cfg, i) for i in range(cfg.chains.n_chains)]
    _claim(paths, force)
    potential = Potential(model, y, cfg.model.gamma, model.prior)
    recorder = Recorder(model.prior, recorded_modes(cfg, model))
    burn = cfg.chains.burn_in if cfg.chains.burn_in is not None else cfg.adaptation.n_steps
    x0 = extra.get("tuned_state") if cfg.chains.start == "tuned" else None
    tasks = [ChainTask(x0, B, potential, cfg.chains.n_steps, cfg.seed, f"chain-{i}", recorder,
                       burn_in=min(burn, cfg.chains.n_steps - 2),
                       header=base_header(cfg, data_hash=dhdr["data_hash"], chain=i),
                       path=str(paths[i])) for i in range(cfg.chains.n_chains)]
    results = run_ensemble(tasks, workers)
    errors = [r for r in results if isinstance(r, BaseException)]
    for i, r in enumerate(results):
        if not isinstance(r, BaseException):
            log.info("chain %d: acceptance %.3f, beta %.4g", i, r.acceptance_rate, r.header["beta_final"])
            if r.partial:
                raise OSError(f"chain {i} record is partial")
    if errors:
        raise errors[0]
    return paths


def load_records(cfg: ExperimentConfig) -> list:
    paths = sorted((_out(cfg) / "chains").glob("chain-*.h5"))
    if not paths:
        raise FileNotFoundError(f"no chain records under {_out(cfg) / 'chains'}")
    recs = [io.load_record(p) for p in paths]
    for r in recs:
        if r.header.get("config_hash") != cfg.hash:
            raise ValueError("chain records come from a different config")
    return recs


def reference_moments(cfg: ExperimentConfig, model, labels, y) -> tuple[np.ndarray, np.ndarray] | None:
    """Exact posterior moments of the recorded columns (heat model only)."""
    if cfg.model.kind != "heat":
        return None
    mean, var = model.exact_posterior(y)
    idx = [int(lab.split("=")[1]) - 1 for lab in labels]
    return mean[idx], var[idx]


def cmd_diagnose(cfg: ExperimentConfig, force: bool = False) -> Path:
    """Per-mode IACT, ESS, PSRF and moments; ACF and relative-error curves."""
    model = build_model(cfg)
    y, _, dhdr = load_data(cfg)
    recs = load_records(cfg)
    rep = _out(cfg) / "report"
    files = [rep / n for n in ("diagnostics.csv", "acf.csv", "relerr.csv", "summary.json")]
    _claim(files, force)
    labels = recs[0].labels
    n = min(len(r.production_values()) for r in recs)
    if n < 2:
        raise ValueError("not enough production samples; lower burn_in or lengthen chains")
    vals = np.stack([r.production_values()[:n] for r in recs])  # chain, step, column
    d = cfg.diagnostics
    max_lag = min(n - 1, d.max_lag if d.max_lag is not None else n - 1)
    ref = reference_moments(cfg, model, labels, y)
    pooled_mean = vals.mean(axis=(0, 1))
    pooled_var = vals.reshape(-1, len(labels)).var(axis=0, ddof=1)

    rows, acfs = [], []
    for j, lab in enumerate(labels):
        rhos = [acf(vals[c, :, j], max_lag) for c in range(len(recs))]
        thetas = [iact(r) for r in rhos]
        ess_total = float(sum(n / (1 + 2 * max(t, 0.0)) for t in thetas))
        R = psrf(vals[:, :, j]) if len(recs) > 1 else float("nan")
        se = float(np.sqrt(pooled_var[j] / ess_total))
        rm, rv = (ref[0][j], ref[1][j]) if ref is not None else (float("nan"), float("nan"))
        rows.append([lab, float(np.mean(thetas)), ess_total, R, pooled_mean[j], pooled_var[j], se, rm, rv])
        acfs.append(np.mean([r[: d.acf_lags + 1] for r in rhos], axis=0))

    mean_alpha = float(np.mean([r.mean_alpha for r in recs]))
    beta = float(recs[0].beta[-1])
    hdr = base_header(cfg, data_hash=dhdr["data_hash"], n_chains=len(recs), n_production=n,
                      variant=recs[0].header["operator"]["variant"])
    write_table(rep / "diagnostics.csv", hdr,
                ["mode", "theta", "ess", "psrf", "mean", "var", "stderr", "ref_mean", "ref_var"], rows)
    L = min(d.acf_lags, max_lag)
    lag_ref = ar1_reference_acf(beta, L, mean_alpha)
    write_table(rep / "acf.csv", {**hdr, "beta": beta, "mean_alpha": mean_alpha},
                ["lag", *labels, "proposal_reference"],
                [[k, *[a[k] for a in acfs], lag_ref[k]] for k in range(L + 1)])

    ref_mean, ref_var = ref if ref is not None else (pooled_mean, pooled_var)
    pts = np.unique(np.geomspace(1, n, d.curve_points).astype(np.int64))
    em = np.mean([relative_error_curve(v, ref_mean, "mean", pts)[1] for v in vals], axis=0)
    ev = np.mean([relative_error_curve(v, ref_var, "var", pts)[1] for v in vals], axis=0)
    write_table(rep / "relerr.csv", {**hdr, "reference": "exact" if ref is not None else "pooled"},
                ["n", "mean_error", "var_error"], zip(pts, em, ev))

    ess = np.array([r[2] for r in rows])
    summary = {**hdr, "acceptance_rate": float(np.mean([r.acceptance_rate for r in recs])),
               "mean_alpha": mean_alpha, "beta": beta, "min_ess": float(ess.min()),
               "min_ess_mode": rows[int(ess.argmin())][0],
               "max_psrf": float(np.nanmax([r[3] for r in rows])) if len(recs) > 1 else None,
               "n_potential_evals": int(sum(r.header.get("n_potential_evals", 0) for r in recs))}
    _write_json(rep / "summary.json", summary)
    return rep


def cmd_compare(cfgs: list[ExperimentConfig], out, force: bool = False) -> Path:
    """ESS side by side, aligned by mode label, with ratios against the O run."""
    if len(cfgs) < 2:
        raise ValueError("compare needs at least two configs")
    out = Path(out)
    path = out / "compare.csv"
    _claim([path], force)
    tables, hdrs = [], []
    for c in cfgs:
        h, rows = read_table(_out(c) / "report" / "diagnostics.csv")
        if h.get("config_hash") != c.hash:
            raise ValueError(f"report under {c.output_dir} is stale for its config")
        hdrs.append(h)
        tables.append({r["mode"]: r for r in rows})
    if len({h["data_hash"] for h in hdrs}) != 1:
        raise ValueError("refusing to compare runs built on different data files")
    names = []
    for c, h in zip(cfgs, hdrs):
        base = h["variant"]
        names.append(base if base not in names else f"{base}{len(names)}")
    base = names.index("O") if "O" in names else 0
    labels = [lab for lab in tables[0] if all(lab in t for t in tables)]
    if not labels:
        raise ValueError("the runs share no recorded modes")
    rows = []
    for lab in labels:
        ess = [float(t[lab]["ess"]) for t in tables]
        rows.append([lab, *ess, *[e / ess[base] for i, e in enumerate(ess) if i != base]])
    cols = ["mode", *[f"ess_{n}" for n in names],
            *[f"ratio_{n}/{names[base]}" for i, n in enumerate(names) if i != base]]
    hdr = {"config_hashes": [c.hash for c in cfgs], "seeds": [c.seed for c in cfgs],
           "data_hash": hdrs[0]["data_hash"]}
    write_table(path, hdr, cols, rows)
    return path


def cmd_analytic1d(cfg: ExperimentConfig, force: bool = False) -> Path:
    """Quadrature sweep of acceptance and lag-1 autocorrelation, plus simulation checks."""
    if cfg.model.kind != "scalar1d":
        raise ValueError("analytic1d needs model.kind = scalar1d")
    s = cfg.analytic1d
    out = _out(cfg)
    files = [out / "sweep.csv", out / "verify.csv", out / "analytic1d.json"]
    _claim(files, force)
    save_run_config(cfg)
    betas, gammas = s.betas.points(), s.gammas.points()
    for b in betas:
        if not 0 < b <= 1:
            raise ValueError(f"beta grid values must lie in (0, 1], got {b}")
    rows = a1d.sweep_lag1(betas, gammas, s.kinds, s.n_cells)
    hdr = base_header(cfg, n_cells=s.n_cells)
    a1d.write_sweep_csv(out / "sweep.csv", rows, {k: io.dumps(v) for k, v in hdr.items()})

    worst = 0.0
    if s.refine_check:
        for kind in s.kinds:
            for g in gammas:
                for b in sorted({betas[0], betas[len(betas) // 2], betas[-1]}):
                    worst = max(worst, a1d.checked_lag1(b, g, kind, s.n_cells)[2])
    vrows = []
    for i, (b, g) in enumerate(s.verify):
        for kind in s.kinds:
            rep = a1d.verify_against_simulation(b, g, substream(cfg.seed, f"verify-{i}-{kind}"), kind,
                                                s.verify_steps, n_cells=s.n_cells)
            vrows.append([b, g, kind, rep.quad_alpha, rep.sim_alpha, rep.sim_alpha_se, rep.quad_lag1,
                          rep.sim_lag1, rep.sim_lag1_se, rep.passed()])
    write_table(out / "verify.csv", hdr,
                ["beta", "gamma", "kind", "quad_alpha", "sim_alpha", "sim_alpha_se", "quad_lag1",
                 "sim_lag1", "sim_lag1_se", "passed"], vrows)
    optima = {f"{kind}@gamma={g!r}": vars(a1d.optimal_beta([r for r in rows if r.kind == kind and r.gamma == g]))
              for kind in s.kinds for g in gammas}
    _write_json(out / "analytic1d.json", {**hdr, "refinement_change": worst, "optima": optima,
                                          "verify_passed": all(r[-1] for r in vrows)})
    return out / "sweep.csv"
