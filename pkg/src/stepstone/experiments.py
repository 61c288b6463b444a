"""Experiment configuration, orchestration and output files.

A run reads one JSON config, validates all of it before simulating anything,
writes CSV/JSON results into the output directory and finishes with
``manifest.json`` listing every file with its sha256.  Result files depend
only on the config and seed; the manifest also records wall-clock time and
so differs between runs.

Time columns come in three flavours where they make sense: ``time_raw``
(model time, each slot replaced at rate 1), ``time_t`` (2 nu * raw) and
``time_u`` (coalescent time).
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .forward import MAX_SLOTS, duality_check
from .genealogy import (lineage_count_samples, pair_coalescence_times, simulate_genealogy,
                        survival_estimate)
from .lattice import KernelError, build_kernel
from .model import InfeasibleGeometry, LimitParams, ModelParams, SampleGeometry, make_sample
from .mutations import (RateProfile, drop_mutations, expected_pairwise, haplotype_partition,
                        mutation_rate_profile, mutation_split, pairwise_components,
                        pairwise_differences, survival_factor, write_haplotypes_csv,
                        write_partition_json)
from .rng import map_replicates, stream
from .theory import (effective_size, expected_time_to_k, kingman_distribution,
                     partition_pair_fraction, thm1_survival, time_change)
from .two_locus import (CURVE_COLUMNS, coalescence_jump_counts, nrbc_analytic, nrbc_changeovers,
                        nrbc_direct, nrbc_homogeneous, skeleton_nrbc, write_nrbc_curve)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


EXPERIMENTS = ("thm1_grid", "thm2_counts", "thm3_counts", "nrbc_curve", "pairwise",
               "mutation_profile", "duality", "formulas")
# experiments computed from closed forms only
ANALYTIC = ("mutation_profile", "formulas")

TOP_KEYS = {"experiment", "model", "geometry", "replicates", "seed", "output", "workers", "options"}
MODEL_KEYS = {"L", "N", "nu", "kernel"}
GEOMETRY_KEYS = {"mode", "n", "c", "beta"}

OPTION_DEFAULTS: dict[str, dict[str, Any]] = {
    "thm1_grid": {"betas": None, "gammas": None},
    "thm2_counts": {"times": [0.25, 0.5, 1.0, 2.0]},
    "thm3_counts": {"gammas": None},
    "nrbc_curve": {"distances_nt": [316, 1000, 2000, 5000, 10000, 50000, 100000],
                   "rho": 1e-8, "skeleton": False},
    "pairwise": {"mu": 1e-4},
    "mutation_profile": {"mu": 1e-4, "sigma2": None, "points": 301},
    "duality": {"x": [1, 0], "times": [1.0, 5.0, 20.0]},
    "formulas": {"sigma2": None, "mu": 1e-4, "rho": 1e-8,
                 "partition": [14, 13, 10, 10, 9, 3, 1], "sample_n": 60, "reduce_to": 7},
}

PRESETS = {
    "paper-example": {
        "experiment": "formulas",
        "model": {"L": 100, "N": 5, "nu": 0.2},
        "geometry": {"mode": "clustered", "n": 2, "c": 1.0, "beta": 0.4},
        "options": {"sigma2": 2.0},
    },
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: ModelParams
    geometry: Optional[SampleGeometry]
    replicates: int
    seed: int
    output: Optional[Path]
    workers: int
    options: dict
    raw: dict

    @property
    def sigma2(self) -> float:
        s = self.options.get("sigma2")
        return self.model.sigma2 if s is None else float(s)

    def limit(self) -> LimitParams:
        beta = self.geometry.beta if self.geometry and self.geometry.beta is not None else 1.0
        return LimitParams.from_model(self.model.L, self.model.N, self.model.nu, self.sigma2, beta)


# -- validation -------------------------------------------------------------


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where, "must be a JSON object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown key")


def _int(value, field, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(field, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(field, f"must be <= {hi}, got {value}")
    return value


def _num(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(field, f"must be a finite number, got {value!r}")
    return float(value)


def _num_list(value, field):
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "must be a non-empty list of numbers")
    return [_num(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _model(d) -> ModelParams:
    _check_keys(d, MODEL_KEYS, "model")
    for k in ("L", "N", "nu"):
        if k not in d:
            raise ConfigError(f"model.{k}", "required")
    L = _int(d["L"], "model.L", lo=2)
    N = _int(d["N"], "model.N", lo=1)
    nu = _num(d["nu"], "model.nu")
    if not 0 < nu <= 1:
        raise ConfigError("model.nu", f"must lie in (0, 1], got {nu}")
    try:
        kernel = build_kernel(d.get("kernel", "nearest4"))
    except (KernelError, ValueError, TypeError) as e:
        raise ConfigError("model.kernel", str(e)) from None
    try:
        return ModelParams(L, N, nu, kernel)
    except ValueError as e:
        raise ConfigError("model.L", str(e)) from None


def _geometry(d) -> SampleGeometry:
    _check_keys(d, GEOMETRY_KEYS, "geometry")
    if "mode" not in d or "n" not in d:
        raise ConfigError("geometry.mode" if "mode" not in d else "geometry.n", "required")
    n = _int(d["n"], "geometry.n", lo=1)
    c = _num(d.get("c", 1.0), "geometry.c")
    beta = d.get("beta")
    if beta is not None:
        beta = _num(beta, "geometry.beta")
    try:
        return SampleGeometry(d["mode"], n, c, beta)
    except ValueError as e:
        field = "geometry.mode" if "mode" in str(e) else "geometry.beta"
        raise ConfigError(field, str(e)) from None


def _options(exp: str, d: dict, geom: Optional[SampleGeometry]) -> dict:
    defaults = OPTION_DEFAULTS[exp]
    _check_keys(d, set(defaults), "options")
    opts = {**defaults, **d}
    for key in ("betas", "gammas", "times", "distances_nt"):
        if opts.get(key) is not None:
            opts[key] = _num_list(opts[key], f"options.{key}")
    for key in ("mu", "rho", "sigma2"):
        if opts.get(key) is not None:
            v = _num(opts[key], f"options.{key}")
            if v < 0 or (key == "sigma2" and v == 0):
                raise ConfigError(f"options.{key}", "must be positive")
            opts[key] = v
    if "points" in opts:
        _int(opts["points"], "options.points", lo=3)
    if "skeleton" in opts and not isinstance(opts["skeleton"], bool):
        raise ConfigError("options.skeleton", "must be true or false")
    if exp == "duality":
        x = opts["x"]
        if not (isinstance(x, list) and len(x) == 2):
            raise ConfigError("options.x", "must be a pair of integers")
        opts["x"] = [_int(v, f"options.x[{i}]") for i, v in enumerate(x)]
    if exp == "formulas":
        part = opts["partition"]
        if not isinstance(part, list) or not part:
            raise ConfigError("options.partition", "must be a non-empty list")
        opts["partition"] = [_int(b, "options.partition", lo=1) for b in part]
        _int(opts["sample_n"], "options.sample_n", lo=2)
        _int(opts["reduce_to"], "options.reduce_to", lo=1, hi=opts["sample_n"] - 1)
    for key in ("times", "distances_nt"):
        if opts.get(key) is not None and min(opts[key]) < 0:
            raise ConfigError(f"options.{key}", "entries must be >= 0")
    if exp == "nrbc_curve" and max(opts["distances_nt"]) * opts["rho"] > 1:
        raise ConfigError("options.distances_nt", "distance times rho must stay <= 1")
    beta = geom.beta if geom is not None else None
    for key in ("betas", "gammas"):
        vals = opts.get(key)
        if vals is not None and not all(0 < v <= 1 for v in vals):
            raise ConfigError(f"options.{key}", "entries must lie in (0, 1]")
    if exp == "thm3_counts" and opts["gammas"] is not None and beta is not None:
        if min(opts["gammas"]) < beta:
            raise ConfigError("options.gammas", f"entries must be >= geometry.beta = {beta}")
    return opts


def _preflight(exp, model, geom, opts):
    """Checks that need the model and geometry together."""
    if exp == "duality":
        if model.slots * model.L**2 > MAX_SLOTS:
            raise ConfigError("model.L", f"duality runs forward and needs 2N L^2 <= {MAX_SLOTS}")
        return
    if exp == "thm2_counts" and geom.mode != "spread":
        raise ConfigError("geometry.mode", "thm2_counts needs a spread sample")
    if exp in ("thm1_grid", "thm3_counts", "nrbc_curve", "mutation_profile", "formulas") \
            and (geom.mode != "clustered"):
        raise ConfigError("geometry.mode", f"{exp} needs a clustered sample")
    if exp in ("thm1_grid", "nrbc_curve") and geom.n != 2:
        raise ConfigError("geometry.n", f"{exp} works with pairs (n = 2)")
    if exp in ANALYTIC:
        return
    geoms = [geom]
    if exp == "thm1_grid" and opts["betas"]:
        geoms = [dataclasses.replace(geom, beta=b) for b in opts["betas"]]
    for g in geoms:
        try:
            make_sample(model, g, stream(0, "preflight"))
        except InfeasibleGeometry as e:
            raise ConfigError("geometry", str(e)) from None


def parse_config(raw: dict, *, seed=None, replicates=None, output=None, workers=None) -> ExperimentConfig:
    """Validate a config dict; keyword overrides replace the matching fields."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be a JSON object")
    raw = json.loads(json.dumps(raw))
    for key, val in (("seed", seed), ("replicates", replicates), ("output", output), ("workers", workers)):
        if val is not None:
            raw[key] = val
    _check_keys(raw, TOP_KEYS, "")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    if "model" not in raw:
        raise ConfigError("model", "required")
    model = _model(raw["model"])
    geom = None
    if "geometry" in raw:
        geom = _geometry(raw["geometry"])
    elif exp != "duality":
        raise ConfigError("geometry", "required")
    if exp in ANALYTIC:
        reps = _int(raw.get("replicates", 1), "replicates", lo=1)
    else:
        if "replicates" not in raw:
            raise ConfigError("replicates", "required")
        reps = _int(raw["replicates"], "replicates", lo=1)
    seed_v = _int(raw.get("seed", 0), "seed", lo=0, hi=2**64 - 1)
    workers_v = _int(raw.get("workers", 1), "workers", lo=1)
    out = raw.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "must be a path string")
    opts = _options(exp, raw.get("options", {}), geom)
    _preflight(exp, model, geom, opts)
    return ExperimentConfig(exp, model, geom, reps, seed_v, Path(out) if out else None,
                            workers_v, opts, raw)


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON: {e}") from None
    return parse_config(raw, **overrides)


# -- writers ----------------------------------------------------------------


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return "" if v is None else v


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    """Header always written, floats via repr so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _u_or_none(lp: LimitParams, t: float):
    try:
        return time_change(lp, t)
    except ValueError:
        return None


def _tv(counts: np.ndarray, pmf: np.ndarray) -> float:
    emp = counts / counts.sum()
    return 0.5 * float(np.abs(emp - pmf).sum())


# -- experiments ------------------------------------------------------------


def _thm1_grid(cfg: ExperimentConfig, out: Path) -> list[str]:
    p = cfg.model
    betas = cfg.options["betas"] or [cfg.geometry.beta]
    rows = []
    for beta in betas:
        geom = dataclasses.replace(cfg.geometry, beta=beta)
        gammas = cfg.options["gammas"] or [beta, (beta + 1) / 2, 1.0]
        gammas = [g for g in gammas if g >= beta]
        horizons = [p.L ** (2 * g) / (2 * p.nu) for g in gammas]
        t0 = pair_coalescence_times(p, geom, max(horizons), cfg.replicates,
                                    cfg.seed, cfg.workers) if gammas else np.array([])
        lp = p.limit(beta)
        for g, h in zip(gammas, horizons):
            est, se = survival_estimate(t0 > h)
            lim = thm1_survival(beta, g, p.alpha)
            rows.append({"beta": beta, "gamma": g, "time_raw": h, "time_t": 2 * p.nu * h,
                         "time_u": _u_or_none(lp, 2 * p.nu * h), "replicates": cfg.replicates,
                         "empirical": est, "se": se, "limit": lim, "abs_diff": abs(est - lim)})
    write_csv(out / "thm1_grid.csv", ["beta", "gamma", "time_raw", "time_t", "time_u", "replicates",
                                      "empirical", "se", "limit", "abs_diff"], rows)
    return ["thm1_grid.csv"]


COUNT_COLUMNS = ["time_raw", "time_t", "time_u", "k", "count", "empirical", "predicted"]


def _count_rows(n, counts_at, raw_times, us, nu, extra=None):
    rows, tvs = [], []
    for j, (h, u) in enumerate(zip(raw_times, us)):
        col = counts_at[:, j]
        hist = np.array([(col == k).sum() for k in range(1, n + 1)])
        pmf = kingman_distribution(n, u)
        tvs.append(_tv(hist, pmf))
        for k in range(1, n + 1):
            row = {"time_raw": h, "time_t": 2 * nu * h, "time_u": u, "k": k,
                   "count": int(hist[k - 1]), "empirical": hist[k - 1] / len(col),
                   "predicted": float(pmf[k - 1])}
            if extra:
                row.update(extra[j])
            rows.append(row)
    return rows, tvs


def _thm2_counts(cfg: ExperimentConfig, out: Path) -> list[str]:
    p, n = cfg.model, cfg.geometry.n
    us = cfg.options["times"]
    raw = [p.h_L * u for u in us]
    counts = lineage_count_samples(p, cfg.geometry, raw, cfg.replicates, cfg.seed, cfg.workers)
    rows, tvs = _count_rows(n, counts, raw, us, p.nu)
    write_csv(out / "thm2_counts.csv", COUNT_COLUMNS, rows)
    write_json(out / "thm2_summary.json",
               {"h_L": p.h_L, "tv": [{"time_u": u, "tv": tv} for u, tv in zip(us, tvs)]})
    return ["thm2_counts.csv", "thm2_summary.json"]


def _thm3_counts(cfg: ExperimentConfig, out: Path) -> list[str]:
    p, g = cfg.model, cfg.geometry
    beta = g.beta
    gammas = cfg.options["gammas"] or [(beta + 1) / 2, 1.0]
    raw = [p.L ** (2 * gm) / (2 * p.nu) for gm in gammas]
    us = [math.log((gm + p.alpha) / (beta + p.alpha)) for gm in gammas]
    counts = lineage_count_samples(p, g, raw, cfg.replicates, cfg.seed, cfg.workers)
    rows, tvs = _count_rows(g.n, counts, raw, us, p.nu, extra=[{"gamma": gm} for gm in gammas])
    write_csv(out / "thm3_counts.csv", ["gamma"] + COUNT_COLUMNS, rows)
    write_json(out / "thm3_summary.json",
               {"alpha": p.alpha, "tv": [{"gamma": gm, "tv": tv} for gm, tv in zip(gammas, tvs)]})
    return ["thm3_counts.csv", "thm3_summary.json"]


def _nrbc_curve(cfg: ExperimentConfig, out: Path) -> list[str]:
    p, o = cfg.model, cfg.options
    lp = p.limit(cfg.geometry.beta)
    jumps = None
    if o["skeleton"]:
        jumps = coalescence_jump_counts(p, cfg.geometry, cfg.replicates, cfg.seed, cfg.workers)
    rows, skel = [], []
    for d in o["distances_nt"]:
        r = d * o["rho"]
        est, se = nrbc_direct(p, cfg.geometry, r, cfg.replicates, cfg.seed, cfg.workers)
        if jumps is not None:
            sk, sk_se = skeleton_nrbc(jumps, r)
            skel.append({"distance_nt": d, "r": r, "skeleton": sk, "skeleton_se": sk_se})
        rows.append({"distance_nt": d, "r": r, "nrbc_mc": est, "nrbc_mc_se": se,
                     "nrbc_analytic": nrbc_analytic(lp, r), "nrbc_homogeneous": nrbc_homogeneous(p.N_e, r)})
    write_nrbc_curve(rows, out / "nrbc_curve.csv")
    files = ["nrbc_curve.csv"]
    if jumps is not None:
        write_csv(out / "nrbc_skeleton.csv", ["distance_nt", "r", "skeleton", "skeleton_se"], skel)
        files.append("nrbc_skeleton.csv")
    return files


def _pairwise_one(rng, params, geom, mu):
    sample = make_sample(params, geom, rng)
    tree = simulate_genealogy(params, sample, None, rng)
    muts = drop_mutations(tree, mu, rng)
    _, mean = pairwise_differences(muts) if tree.n > 1 else (None, 0.0)
    return float(tree.merge_times[0]) if tree.n_merges else 0.0, mean, muts


def _pairwise(cfg: ExperimentConfig, out: Path) -> list[str]:
    p, g, mu = cfg.model, cfg.geometry, cfg.options["mu"]
    if g.n < 2:
        raise ValueError("pairwise needs at least two sampled lineages")
    res = map_replicates(_pairwise_one, (p, g, mu), cfg.seed, "pairwise", cfg.replicates, cfg.workers)
    lp = cfg.limit()
    rows = []
    for i, (t0, mean, _) in enumerate(res):
        rows.append({"replicate": i, "first_merge_raw": t0, "first_merge_t": 2 * p.nu * t0,
                     "first_merge_u": _u_or_none(lp, 2 * p.nu * t0), "mean_differences": mean})
    write_csv(out / "pairwise.csv", ["replicate", "first_merge_raw", "first_merge_t", "first_merge_u",
                                     "mean_differences"], rows)
    means = np.array([r[1] for r in res])
    summary = {"mu": mu, "replicates": cfg.replicates, "mean": float(means.mean()),
               "se": float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else None}
    if g.mode == "clustered":
        summary["expected_limit"] = expected_pairwise(lp, mu)
    write_json(out / "pairwise_summary.json", summary)
    first = res[0][2]
    write_haplotypes_csv(first, out / "haplotypes.csv")
    write_partition_json(haplotype_partition(first), out / "partition.json")
    return ["pairwise.csv", "pairwise_summary.json", "haplotypes.csv", "partition.json"]


def profile_rows(lp: LimitParams, mu: float, points: int) -> list[dict]:
    """(u, rate) on [0, 3 u1] with separate left and right rows at u1."""
    prof = RateProfile(mu, lp)
    u1 = lp.u1
    rows = []
    for u in np.linspace(0.0, 3 * u1, points):
        u = float(u)
        if math.isclose(u, u1, rel_tol=1e-12):
            continue
        rows.append({"u": u, "rate": mutation_rate_profile(prof, u)})
    rows.append({"u": u1, "rate": mutation_rate_profile(prof, u1)})
    rows.append({"u": u1, "rate": prof.late_rate})
    rows.sort(key=lambda r: r["u"])
    return rows


def _mutation_profile(cfg: ExperimentConfig, out: Path) -> list[str]:
    rows = profile_rows(cfg.limit(), cfg.options["mu"], cfg.options["points"])
    write_csv(out / "mutation_profile.csv", ["u", "rate"], rows)
    return ["mutation_profile.csv"]


def _duality(cfg: ExperimentConfig, out: Path) -> list[str]:
    o = cfg.options
    rows = duality_check(cfg.model, o["x"], o["times"], cfg.replicates, cfg.seed, cfg.workers)
    for r in rows:
        r["time_raw"] = r.pop("t")
        r["time_t"] = 2 * cfg.model.nu * r["time_raw"]
    write_csv(out / "duality.csv", ["time_raw", "time_t", "forward", "forward_se", "backward",
                                    "backward_se", "diff"], rows)
    return ["duality.csv"]


def formulas_report(cfg: ExperimentConfig) -> dict:
    """Closed-form numbers for the configured parameters."""
    m, o = cfg.model, cfg.options
    s2 = cfg.sigma2
    lp = cfg.limit()
    ne = effective_size(m.L, m.N, m.nu, s2)
    late, early = pairwise_components(lp)
    before, after = mutation_split(lp, o["mu"])
    r_l2, r_beta = nrbc_changeovers(lp)
    return {
        "inputs": {"L": m.L, "N": m.N, "nu": m.nu, "sigma2": s2, "beta": lp.beta,
                   "mu": o["mu"], "rho": o["rho"]},
        "alpha": lp.alpha,
        "Ne": ne["exact"],
        "Ne_factor": ne.get("factor"),
        "Ne_approx": ne.get("approx"),
        "survival": survival_factor(lp),
        "u1": lp.u1,
        "pair_fraction": partition_pair_fraction(o["partition"]),
        "partition": o["partition"],
        "expected_time_to_k": expected_time_to_k(o["sample_n"], o["reduce_to"]),
        "pairwise_components": {"late": late, "early": early},
        "pairwise_per_mu": expected_pairwise(lp, 1.0),
        "pairwise": expected_pairwise(lp, o["mu"]),
        "mutation_split": {"before_u1": before, "after_u1": after},
        "constant_phase_rate": RateProfile(o["mu"], lp).late_rate,
        "nrbc_changeovers": {
            "r_uL2": r_l2, "distance_nt_uL2": r_l2 / o["rho"],
            "r_uL2beta": r_beta, "distance_nt_uL2beta": r_beta / o["rho"],
            "nrbc_at_uL2beta": nrbc_analytic(lp, r_beta),
        },
    }


def _formulas(cfg: ExperimentConfig, out: Path) -> list[str]:
    write_json(out / "formulas.json", formulas_report(cfg))
    return ["formulas.json"]


RUNNERS = {
    "thm1_grid": _thm1_grid,
    "thm2_counts": _thm2_counts,
    "thm3_counts": _thm3_counts,
    "nrbc_curve": _nrbc_curve,
    "pairwise": _pairwise,
    "mutation_profile": _mutation_profile,
    "duality": _duality,
    "formulas": _formulas,
}


def run(cfg: ExperimentConfig, output: Optional[os.PathLike] = None) -> dict:
    """Run the experiment and write its files plus ``manifest.json``."""
    out = Path(output) if output is not None else cfg.output
    if out is None:
        raise ConfigError("output", "required")
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = RUNNERS[cfg.experiment](cfg, out)
    manifest = {
        "config": cfg.raw,
        "version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - start, 3),
        "files": {name: sha256(out / name) for name in files},
    }
    write_json(out / "manifest.json", manifest)
    return manifest
