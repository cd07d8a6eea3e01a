"""
Sweep experiments: evaluation, CSV/SVG output and run metadata.

Each grid point gets its own RNG stream spawned from the master seed and
the (experiment, point) index, so results do not depend on how points are
distributed over worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..capacity import awgn_capacity, capacity, ceiling, net_rate, sinr_eff
from ..channel import AntennaConfig, PointingState, ScenarioGeometry, mean_pointing_loss
from ..constants import linear_to_db
from ..hardware import PhaseNoiseModel
from ..scenario import LinkScenario
from ..sensing import PilotFrame, bayesian_fim
from ..tradeoff import Constellation, TradeoffProblem, ba_optimize
from . import svg
from .config import EXPERIMENT_IDS, ExperimentConfig, build_profile


class NumericalFailure(RuntimeError):
    """A sweep produced NaN where a number was expected."""


@dataclass
class SweepResult:
    experiment: str
    columns: dict  # "name(unit)" -> list of values; first column(s) are the axes
    axis_columns: tuple
    metadata: dict = field(default_factory=dict)
    chart: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))

    def column(self, name: str) -> np.ndarray:
        for key, vals in self.columns.items():
            if key == name or key.split("(")[0] == name:
                return np.asarray(vals)
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Scenario construction (pure functions of the resolved config dict)
# ---------------------------------------------------------------------------

def _profile(cfg: dict, name: str):
    prof = cfg["profiles"]
    return build_profile(name, prof["overrides"].get(name, {}), prof["gamma_source"])


def base_scenario(cfg: dict, profile_name: str, **kw) -> LinkScenario:
    s = cfg["scenario"]
    ant = AntennaConfig(diameter_m=kw.pop("diameter_m", s["diameter_m"]),
                        carrier_hz=kw.pop("carrier_hz", s["carrier_hz"]),
                        gain_mode=kw.pop("gain_mode", s["gain_mode"]),
                        efficiency=s["aperture_efficiency"],
                        fixed_gain_dbi=(s["fixed_gain_dbi"], s["fixed_gain_dbi"]))
    geom = ScenarioGeometry(range_m=kw.pop("range_m", s["range_m"]), range_rate_mps=s["range_rate_mps"])
    frame = PilotFrame(m_pilots=s["m_pilots"], frame_symbols=s["frame_symbols"],
                       frame_duration=s["frame_duration_s"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return LinkScenario(geometry=geom, antenna=ant, pointing=PointingState(rms_rad=s["pointing_rms_rad"]),
                            frame=frame, profile=_profile(cfg, profile_name),
                            tx_power_dbm=kw.pop("tx_power_dbm", s["tx_power_dbm"]),
                            noise_figure_db=s["noise_figure_db"], noise_bandwidth_hz=s["noise_bandwidth_hz"],
                            ibo_kappa=10.0 ** (-s["ibo_db"] / 10.0), dse_below_db=s["dse_below_db"],
                            covariance=s["covariance"], **kw)


def _rng(seed: int, exp_idx: int, point_idx: int, sub: int = 0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(exp_idx, point_idx, sub)))


def _with_pointing(sc: LinkScenario, cfg: dict, rng) -> LinkScenario:
    mean, _ = mean_pointing_loss(sc.pointing.rms_rad, sc.antenna, cfg["monte_carlo"]["pointing_draws"], rng)
    return sc.with_(pointing_factor=mean)


def _axis_values(ax: dict) -> np.ndarray:
    if ax["scale"] == "log":
        return np.geomspace(ax["start"], ax["stop"], ax["points"])
    return np.linspace(ax["start"], ax["stop"], ax["points"])


def _rmse(sc: LinkScenario):
    res = bayesian_fim(sc.sensing_state(), ("range", "los_velocity"))
    return res.rmse("range"), res.rmse("los_velocity")


# ---------------------------------------------------------------------------
# Point evaluators (module level so they pickle)
# ---------------------------------------------------------------------------

def _pt_rmse_snr(cfg, exp_idx, i, snr_db):
    out = {}
    for j, name in enumerate(cfg["profiles"]["names"]):
        sc = _with_pointing(base_scenario(cfg, name), cfg, _rng(cfg["seed"], exp_idx, i, j))
        out[name] = _rmse(sc.with_snr0_db(snr_db))
    return out


def _pt_awgn(cfg, exp_idx, i, snr_db):
    out = _pt_rmse_snr(cfg, exp_idx, i, snr_db)
    sc = base_scenario(cfg, cfg["profiles"]["names"][0]).with_snr0_db(snr_db)
    st = sc.sensing_state(gamma_eff=0.0, phase_noise=PhaseNoiseModel(), dse_residual_w=0.0)
    res = bayesian_fim(st, ("range", "los_velocity"))
    out["__awgn__"] = (res.rmse("range"), res.rmse("los_velocity"))
    return out


def _pt_freq(cfg, exp_idx, i, fc, snr_db):
    out = {}
    for j, name in enumerate(cfg["profiles"]["names"]):
        sc = _with_pointing(base_scenario(cfg, name, carrier_hz=fc), cfg, _rng(cfg["seed"], exp_idx, i, j))
        out[name] = _rmse(sc.with_snr0_db(snr_db))
    return out


def _pt_distance(cfg, exp_idx, i, r, carriers, gain_mode):
    out = {}
    k = 0
    for fc in carriers:
        for name in cfg["profiles"]["names"]:
            sc = base_scenario(cfg, name, carrier_hz=fc, range_m=r, gain_mode=gain_mode)
            sc = _with_pointing(sc, cfg, _rng(cfg["seed"], exp_idx, i, k))
            k += 1
            rr, _ = _rmse(sc)
            out[(name, fc)] = (sc.capacity_bits, float(linear_to_db(sc.snr0)), rr)
    return out


def _pt_frontier(cfg, exp_idx, prof_idx, name, opts):
    sc = _with_pointing(base_scenario(cfg, name), cfg, _rng(cfg["seed"], exp_idx, prof_idx, 0))
    const = Constellation.from_name(opts["constellation"])
    prob = TradeoffProblem.from_scenario(sc, const, cfg["monte_carlo"]["mi_samples"],
                                         {"range": opts["reference_range_rmse_m"] ** 2,
                                          "los_velocity": opts["reference_velocity_rmse_mps"] ** 2})
    ch, dm = prob.channel, prob.distortion
    d_unif = dm.value(1.0)
    d_min = dm.minimum_over(const)
    mi_seed = int(np.random.SeedSequence(cfg["seed"], spawn_key=(exp_idx, prof_idx, 1)).generate_state(1)[0])
    fracs = list(opts["target_fractions"]) + ([math.inf] if opts["include_unconstrained"] else [])
    rows = []
    for f in fracs:
        target = math.inf if math.isinf(f) else d_min + f * (d_unif - d_min)
        if target <= 0:
            target = d_min
        pt = ba_optimize(const, prob, target, max_iters=opts["max_iters"], seed=mi_seed)
        avg_p = const.average_power(pt.distribution)
        st = sc.sensing_state().with_(pilot_power=sc.tx_power_w * avg_p)
        r_rmse = bayesian_fim(st, ("range", "los_velocity")).rmse("range")
        rows.append({
            "fraction": f, "target": target, "distortion": pt.distortion, "rate": pt.rate,
            "stderr": pt.rate_stderr,
            "net_rate_gbps": float(net_rate(pt.rate, sc.frame.m_pilots, sc.frame.frame_symbols,
                                            sc.profile.system_bandwidth)) / 1e9,
            "range_rmse": r_rmse, "converged": pt.converged, "feasible": pt.feasible, "lam": pt.lam,
            "iterations": pt.iterations, "closed_form": ch.capacity_bound(avg_p),
        })
    return rows


def _pt_feasibility(cfg, exp_idx, i, p_dbm, diameters, profile, cmin, rmax):
    out = []
    for j, d in enumerate(diameters):
        sc = base_scenario(cfg, profile, tx_power_dbm=p_dbm, diameter_m=d)
        sc = _with_pointing(sc, cfg, _rng(cfg["seed"], exp_idx, i, j))
        c = sc.capacity_bits
        rr, _ = _rmse(sc)
        comm, sense = c >= cmin, rr <= rmax
        cls = "feasible" if comm and sense else "comm-only" if comm else "sense-only" if sense else "fail"
        out.append((c, rr, cls))
    return out


def _call(args):
    fn, a = args
    return fn(*a)


def _map(fn, arglists, jobs: int):
    tasks = [(fn, a) for a in arglists]
    if jobs <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_call, tasks))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _labels(cfg):
    return {n: _profile(cfg, n).label for n in cfg["profiles"]["names"]}


def exp_capacity_vs_snr(cfg, opts, exp_idx, jobs):
    snr_db = _axis_values(opts["snr0_db"])
    snr = 10.0 ** (snr_db / 10.0)
    cols = {"snr0(dB)": snr_db}
    chart = {}
    for name in cfg["profiles"]["names"]:
        p = _profile(cfg, name)
        s2, g = p.phase_variance, p.gamma_eff
        c = capacity(sinr_eff(snr, s2, g))
        cols[f"{name}_capacity(bits/symbol)"] = c
        cols[f"{name}_ceiling(bits/symbol)"] = np.full_like(snr, ceiling(s2, g))
        chart[p.label] = c
        chart[p.label + " ceiling"] = cols[f"{name}_ceiling(bits/symbol)"]
    cols["awgn_capacity(bits/symbol)"] = awgn_capacity(snr)
    chart["AWGN"] = cols["awgn_capacity(bits/symbol)"]
    return cols, ("snr0(dB)",), dict(kind="line", x="snr0(dB)", series=chart, xlabel="SNR0 (dB)",
                                    ylabel="capacity (bits/symbol)", title="Capacity versus SNR")


def exp_awgn_comparison(cfg, opts, exp_idx, jobs):
    snr_db = _axis_values(opts["snr0_db"])
    snr = 10.0 ** (snr_db / 10.0)
    pts = _map(_pt_awgn, [(cfg, exp_idx, i, s) for i, s in enumerate(snr_db)], jobs)
    cols = {"snr0(dB)": snr_db, "awgn_capacity(bits/symbol)": awgn_capacity(snr),
            "awgn_range_rmse(m)": np.array([p["__awgn__"][0] for p in pts])}
    chart = {"AWGN capacity": cols["awgn_capacity(bits/symbol)"]}
    for name in cfg["profiles"]["names"]:
        p = _profile(cfg, name)
        c = capacity(sinr_eff(snr, p.phase_variance, p.gamma_eff))
        cols[f"{name}_capacity(bits/symbol)"] = c
        cols[f"{name}_capacity_gap(bits/symbol)"] = cols["awgn_capacity(bits/symbol)"] - c
        cols[f"{name}_range_rmse(m)"] = np.array([q[name][0] for q in pts])
        chart[p.label] = c
    return cols, ("snr0(dB)",), dict(kind="line", x="snr0(dB)", series=chart, xlabel="SNR0 (dB)",
                                    ylabel="capacity (bits/symbol)", title="AWGN versus hardware-aware capacity")


def exp_rmse_vs_snr(cfg, opts, exp_idx, jobs):
    snr_db = _axis_values(opts["snr0_db"])
    pts = _map(_pt_rmse_snr, [(cfg, exp_idx, i, s) for i, s in enumerate(snr_db)], jobs)
    cols = {"snr0(dB)": snr_db}
    chart = {}
    labels = _labels(cfg)
    for name in cfg["profiles"]["names"]:
        cols[f"{name}_range_rmse(m)"] = np.array([p[name][0] for p in pts])
        cols[f"{name}_velocity_rmse(m/s)"] = np.array([p[name][1] for p in pts])
        chart[labels[name]] = cols[f"{name}_range_rmse(m)"]
    return cols, ("snr0(dB)",), dict(kind="line", x="snr0(dB)", series=chart, xlabel="SNR0 (dB)",
                                    ylabel="range RMSE (m)", ylog=True, title="Ranging RMSE versus SNR")


def exp_freq_sweep(cfg, opts, exp_idx, jobs):
    fc = _axis_values(opts["carrier_hz"])
    pts = _map(_pt_freq, [(cfg, exp_idx, i, f, opts["snr0_db"]) for i, f in enumerate(fc)], jobs)
    cols = {"carrier(Hz)": fc}
    chart = {}
    labels = _labels(cfg)
    for name in cfg["profiles"]["names"]:
        cols[f"{name}_range_rmse(m)"] = np.array([p[name][0] for p in pts])
        cols[f"{name}_velocity_rmse(m/s)"] = np.array([p[name][1] for p in pts])
        chart[labels[name]] = cols[f"{name}_range_rmse(m)"]
    return cols, ("carrier(Hz)",), dict(kind="line", x="carrier(Hz)", series=chart, xlabel="carrier (Hz)",
                                       ylabel="range RMSE (m)", xlog=True, ylog=True,
                                       title=f"Range RMSE versus carrier at SNR0 = {opts['snr0_db']:g} dB")


def exp_distance_sweep(cfg, opts, exp_idx, jobs):
    r = _axis_values(opts["range_m"])
    carriers = opts["carriers_hz"]
    pts = _map(_pt_distance, [(cfg, exp_idx, i, x, carriers, opts["gain_mode"]) for i, x in enumerate(r)], jobs)
    cols = {"range(m)": r}
    chart = {}
    labels = _labels(cfg)
    for fc in carriers:
        tag = f"{fc / 1e9:g}GHz"
        for name in cfg["profiles"]["names"]:
            cols[f"{name}_capacity_{tag}(bits/symbol)"] = np.array([p[(name, fc)][0] for p in pts])
            cols[f"{name}_snr0_{tag}(dB)"] = np.array([p[(name, fc)][1] for p in pts])
            cols[f"{name}_range_rmse_{tag}(m)"] = np.array([p[(name, fc)][2] for p in pts])
            chart[f"{labels[name]} {tag}"] = cols[f"{name}_capacity_{tag}(bits/symbol)"]
    return cols, ("range(m)",), dict(kind="line", x="range(m)", series=chart, xlabel="range (m)",
                                    ylabel="capacity (bits/symbol)", title="Capacity versus distance")


def exp_gamma_sweep(cfg, opts, exp_idx, jobs):
    g = _axis_values(opts["gamma_eff"])
    s2 = opts["phase_variance_rad2"]
    cols = {"gamma_eff(1)": g}
    chart = {}
    for snr_db in opts["snr0_db_list"]:
        snr = 10.0 ** (snr_db / 10.0)
        c = np.array([float(capacity(sinr_eff(snr, s2, x))) for x in g])
        cols[f"capacity_snr{snr_db:g}dB(bits/symbol)"] = c
        chart[f"SNR0 {snr_db:g} dB"] = c
    cols["ceiling(bits/symbol)"] = np.array([ceiling(s2, x) for x in g])
    chart["ceiling"] = cols["ceiling(bits/symbol)"]
    return cols, ("gamma_eff(1)",), dict(kind="line", x="gamma_eff(1)", series=chart, xlabel="Gamma_eff",
                                        ylabel="capacity (bits/symbol)", xlog=True,
                                        title="Hardware quality factor versus capacity")


def exp_cd_frontier(cfg, opts, exp_idx, jobs):
    names = cfg["profiles"]["names"]
    res = _map(_pt_frontier, [(cfg, exp_idx, k, n, opts) for k, n in enumerate(names)], jobs)
    fr = [row["fraction"] for row in res[0]]
    cols = {"target_fraction(1)": np.array(fr, dtype=float)}
    chart = {}
    labels = _labels(cfg)
    for name, rows in zip(names, res):
        def col(key):
            return np.array([row[key] for row in rows], dtype=float)
        cols[f"{name}_target(1)"] = col("target")
        cols[f"{name}_distortion(1)"] = col("distortion")
        cols[f"{name}_rate(bits/symbol)"] = col("rate")
        cols[f"{name}_rate_stderr(bits/symbol)"] = col("stderr")
        cols[f"{name}_closed_form_bound(bits/symbol)"] = col("closed_form")
        cols[f"{name}_net_rate(Gbit/s)"] = col("net_rate_gbps")
        cols[f"{name}_range_rmse(m)"] = col("range_rmse")
        cols[f"{name}_lambda(1)"] = col("lam")
        cols[f"{name}_iterations(count)"] = col("iterations")
        cols[f"{name}_converged(bool)"] = col("converged")
        cols[f"{name}_feasible(bool)"] = col("feasible")
        chart[labels[name]] = (cols[f"{name}_range_rmse(m)"], cols[f"{name}_net_rate(Gbit/s)"])
    return cols, ("target_fraction(1)",), dict(kind="xy", series=chart, xlabel="range RMSE (m)",
                                              ylabel="net rate (Gbit/s)", xlog=True,
                                              title="Capacity-distortion frontier")


def exp_feasibility_map(cfg, opts, exp_idx, jobs):
    pw = _axis_values(opts["tx_power_dbm"])
    dm = _axis_values(opts["diameter_m"])
    res = _map(_pt_feasibility, [(cfg, exp_idx, i, p, list(dm), opts["profile"], opts["min_capacity_bits"],
                                  opts["max_rmse_m"]) for i, p in enumerate(pw)], jobs)
    P, D, C, R, K = [], [], [], [], []
    for p, row in zip(pw, res):
        for d, (c, rr, cls) in zip(dm, row):
            P.append(p), D.append(d), C.append(c), R.append(rr), K.append(cls)
    cols = {"tx_power(dBm)": np.array(P), "diameter(m)": np.array(D), "capacity(bits/symbol)": np.array(C),
            "range_rmse(m)": np.array(R), "class(label)": K}
    grid = [[res[i][j][2] for i in range(len(pw))] for j in range(len(dm))]
    return cols, ("tx_power(dBm)", "diameter(m)"), dict(
        kind="grid", xs=list(pw), ys=list(dm), classes=grid, xlabel="transmit power (dBm)",
        ylabel="antenna diameter (m)",
        title=f"ISAC feasibility ({_profile(cfg, opts['profile']).label}: C >= {opts['min_capacity_bits']:g} "
              f"bits/symbol, RMSE <= {opts['max_rmse_m']:g} m)")


EXPERIMENTS = {
    "capacity_vs_snr": exp_capacity_vs_snr,
    "rmse_vs_snr": exp_rmse_vs_snr,
    "freq_sweep": exp_freq_sweep,
    "distance_sweep": exp_distance_sweep,
    "gamma_sweep": exp_gamma_sweep,
    "cd_frontier": exp_cd_frontier,
    "feasibility_map": exp_feasibility_map,
    "awgn_comparison": exp_awgn_comparison,
}


# ---------------------------------------------------------------------------
# Orchestration and output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return format(float(v), ".10g")


def write_csv(path, result: SweepResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = list(result.columns)
        w.writerow(keys)
        for i in range(result.n_rows):
            w.writerow([_fmt(result.columns[k][i]) for k in keys])


def _write_chart(path, result: SweepResult, config_hash: str):
    ch = result.chart
    if ch["kind"] == "grid":
        svg.category_grid(path, ch["title"], ch["xs"], ch["ys"], ch["classes"], ch["xlabel"], ch["ylabel"],
                          config_hash)
        return
    if ch["kind"] == "xy":
        # one polyline per profile with its own x values; sort by x
        series = {}
        xs_all = []
        for label, (x, y) in ch["series"].items():
            xs_all.append(np.asarray(x))
            series[label] = (np.asarray(x), np.asarray(y))
        x_union = np.unique(np.concatenate(xs_all))
        aligned = {}
        for label, (x, y) in series.items():
            yy = np.full(x_union.shape, np.nan)
            for a, b in zip(x, y):
                yy[np.searchsorted(x_union, a)] = b
            aligned[label] = yy
        svg.line_chart(path, ch["title"], x_union, _fill_gaps(x_union, aligned), ch["xlabel"], ch["ylabel"],
                       config_hash, xlog=ch.get("xlog", False))
        return
    x = result.columns[ch["x"]]
    svg.line_chart(path, ch["title"], x, ch["series"], ch["xlabel"], ch["ylabel"], config_hash,
                   xlog=ch.get("xlog", False), ylog=ch.get("ylog", False))


def _fill_gaps(x, series):
    out = {}
    for k, y in series.items():
        ok = np.isfinite(y)
        out[k] = np.interp(x, x[ok], y[ok], left=np.nan, right=np.nan) if ok.sum() >= 2 else y
    return out


def _check_finite(result: SweepResult):
    for k, v in result.columns.items():
        if k.endswith("(label)"):
            continue
        a = np.asarray(v, dtype=float)
        if np.any(np.isnan(a)):
            raise NumericalFailure(f"{result.experiment}: column {k} contains NaN")


def run_experiment(cfg: ExperimentConfig, exp_id: str, out_dir=None, jobs: int = 1) -> SweepResult:
    if exp_id not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {exp_id!r}")
    opts = cfg.experiments.get(exp_id)
    if opts is None:
        from .config import EXPERIMENT_SCHEMAS, _section, _Ctx
        opts = _section(EXPERIMENT_SCHEMAS[exp_id], None, _Ctx({}, "<defaults>"), ("experiments", exp_id))
    d = cfg.to_dict()
    exp_idx = EXPERIMENT_IDS.index(exp_id)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cols, axes, chart = EXPERIMENTS[exp_id](d, opts, exp_idx, jobs)
    wall = time.perf_counter() - t0
    h = cfg.config_hash()
    meta = {
        "experiment": exp_id, "config_hash": h, "seed": cfg.seed, "toolkit_version": __version__,
        "wall_clock_s": round(wall, 3), "python": platform.python_version(), "jobs": jobs,
        "extrapolations": list(cfg.extrapolations),
        "profiles": [p.summary() for p in cfg.hardware_profiles()],
        "resolved_config": d,
        "units": {k: k[k.rfind("(") + 1:-1] for k in cols},
    }
    res = SweepResult(experiment=exp_id, columns={k: list(v) for k, v in cols.items()}, axis_columns=axes,
                      metadata=meta, chart=chart)
    _check_finite(res)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fmts = cfg.output["formats"]
        if "csv" in fmts:
            write_csv(out / f"{exp_id}.csv", res)
        if "svg" in fmts:
            _write_chart(out / f"{exp_id}.svg", res, h)
        with open(out / f"{exp_id}.meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    return res


def run_all(cfg: ExperimentConfig, out_dir=None, jobs: int = 1, only=None) -> dict:
    ids = [e for e in cfg.experiments if only is None or e in only]
    results = {}
    for e in ids:
        results[e] = run_experiment(cfg, e, out_dir, jobs)
    if out_dir is not None:
        summary = {"config_hash": cfg.config_hash(), "seed": cfg.seed, "toolkit_version": __version__,
                   "experiments": {e: r.metadata["wall_clock_s"] for e, r in results.items()},
                   "resolved_config": cfg.to_dict(), "extrapolations": list(cfg.extrapolations)}
        with open(Path(out_dir) / "run.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=str)
    return results
