"""Analysis configuration, execution and report emission."""

import copy
import hashlib
import json
import math
import os
from datetime import datetime, timezone

import numpy as np
from scipy import stats

from . import __version__
from .correlation import (
    autocorrelation,
    coarse_fine_correlation,
    volatility_clustering_slopes,
    volume_volatility_correlation,
)
from .density import (
    BANDWIDTH_RULES,
    ccdf,
    fit_gaussian,
    fit_student_t,
    fit_tail_exponent,
    kde_epanechnikov,
    power_law_fit,
)
from .errors import ConfigInvalid, StylizedFactsError
from .moments import (
    BootstrapConfig,
    default_checkpoints,
    fit_taylor_pairs,
    kurtosis_by_scale,
    running_second_moment,
    scale_moments,
)
from .persistence import fit_persistence_exponent, persistence_curve
from .quakes import (
    EventCatalog,
    detect_onsets,
    event_counter,
    fit_gutenberg_richter,
    fit_omori,
    gr_counts,
    omori_model,
)
from .series import ColumnSchema, load_csv, log_returns

ANALYSES = ("density", "tails", "moments", "kurtosis", "taylor", "acf", "volvol", "coarse",
            "omori", "gutenberg", "persistence")
STOCHASTIC = ("kurtosis", "persistence")
OUTPUT_ENV = "STYLIZED_FACTS_OUTPUT_DIR"
DEFAULT_TAUS = [1, 2, 5, 10, 20, 50, 100, 200, 400]

DEFAULT_CONFIG = {
    "input": {"path": None, "timestamp": "timestamp", "close": "close", "volume": None, "cadence": None},
    "seed": None,
    "output_dir": "stylized-facts-out",
    "analyses": list(ANALYSES),
    "keep_going": False,
    "density": {"bandwidth_rule": "variance", "bandwidth": None, "grid_size": None},
    "tails": {"tail_fraction": 0.1, "min_count": 10, "student_t": True},
    "moments": {"checkpoints": None},
    "kurtosis": {"taus": DEFAULT_TAUS, "n_samples": 100, "sample_size": 100},
    "taylor": {"taus": DEFAULT_TAUS},
    "acf": {"max_lag": 50, "fit_lag_range": [1, 50], "strict": False},
    "volvol": {"max_lag": 50, "proxy": "squared-return", "window": 21, "mode": "coefficient"},
    "coarse": {"T": 4000, "max_lag": 200, "mode": "coefficient"},
    "omori": {"threshold_sigmas": 3.0, "onset_threshold_sigmas": None, "min_gap": None,
              "catalog": None, "delta": 1.0},
    "gutenberg": {"n_thresholds": 50, "min_count": 10, "magnitude_range": None},
    "persistence": {"n_starts": 40000, "max_duration": 1000, "fit_range": [1, 100]},
}


class AnalysisFailed(StylizedFactsError):
    """A module error raised inside one analysis block."""

    def __init__(self, analysis, error):
        self.analysis = analysis
        self.error = error
        self.exit_code = getattr(error, "exit_code", 4)
        super().__init__(f"{analysis}: {type(error).__name__}: {error}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigInvalid(where, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigInvalid(where, "expected an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def resolve_config(raw: dict) -> dict:
    """Overlay ``raw`` on the defaults; unknown fields are rejected."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "config must be a JSON object")
    return _merge(DEFAULT_CONFIG, raw)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("config", f"invalid JSON: {exc}") from None
    return resolve_config(raw)


def set_field(cfg: dict, dotted: str, value):
    """Apply an override such as ``coarse.T=500`` (value parsed as JSON when possible)."""
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigInvalid(dotted, "unknown field")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigInvalid(dotted, "unknown field")
    node[keys[-1]] = value


def _require(cond, field, reason):
    if not cond:
        raise ConfigInvalid(field, reason)


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def validate(cfg: dict, n_prices: int, has_volume: bool):
    """Check every requested block against the data before anything runs."""
    analyses = cfg["analyses"]
    _require(isinstance(analyses, list) and analyses, "analyses", "must be a non-empty list")
    for a in analyses:
        _require(a in ANALYSES, "analyses", f"unknown analysis {a!r}")
    seed = cfg["seed"]
    if any(a in STOCHASTIC for a in analyses):
        _require(seed is not None, "seed", "a seed is required for stochastic analyses (kurtosis, persistence)")
    if seed is not None:
        _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
                 "seed", "must be a non-negative integer")
    n_ret = n_prices - 1
    _require(n_ret >= 2, "input", "series needs at least three prices")
    want = set(analyses)
    if "density" in want:
        d = cfg["density"]
        _require(d["bandwidth_rule"] in BANDWIDTH_RULES, "density.bandwidth_rule",
                 f"must be one of {BANDWIDTH_RULES}")
        _require(d["bandwidth"] is None or (isinstance(d["bandwidth"], (int, float)) and d["bandwidth"] > 0),
                 "density.bandwidth", "must be positive or null")
        _require(d["grid_size"] is None or (_pos_int(d["grid_size"]) and d["grid_size"] >= 2),
                 "density.grid_size", "must be an integer >= 2 or null")
    if "tails" in want:
        t = cfg["tails"]
        _require(isinstance(t["tail_fraction"], (int, float)) and 0 < t["tail_fraction"] <= 1,
                 "tails.tail_fraction", "must lie in (0, 1]")
        _require(_pos_int(t["min_count"]), "tails.min_count", "must be a positive integer")
    if "moments" in want and cfg["moments"]["checkpoints"] is not None:
        cps = cfg["moments"]["checkpoints"]
        _require(isinstance(cps, list) and cps and all(_pos_int(c) and 2 <= c <= n_ret for c in cps),
                 "moments.checkpoints", f"must be integers in [2, {n_ret}]")
    for block in ("kurtosis", "taylor"):
        if block in want:
            taus = cfg[block]["taus"]
            _require(isinstance(taus, list) and taus and all(_pos_int(t) for t in taus),
                     f"{block}.taus", "must be a list of positive integers")
            _require(max(taus) < n_prices - 1, f"{block}.taus",
                     f"largest tau {max(taus)} must be below {n_prices - 1}")
    if "taylor" in want:
        _require(len(set(cfg["taylor"]["taus"])) >= 3, "taylor.taus", "needs at least three scales")
    if "kurtosis" in want:
        k = cfg["kurtosis"]
        _require(_pos_int(k["n_samples"]), "kurtosis.n_samples", "must be a positive integer")
        _require(_pos_int(k["sample_size"]), "kurtosis.sample_size", "must be a positive integer")
    if "acf" in want:
        a = cfg["acf"]
        _require(_pos_int(a["max_lag"]), "acf.max_lag", "must be a positive integer")
        lo, hi = a["fit_lag_range"]
        _require(_pos_int(lo) and _pos_int(hi) and lo < hi <= a["max_lag"], "acf.fit_lag_range",
                 "must satisfy 1 <= lo < hi <= max_lag")
        _require(n_ret >= 2 * a["max_lag"], "acf.max_lag", f"needs at least {2 * a['max_lag']} returns")
    if "volvol" in want:
        v = cfg["volvol"]
        _require(has_volume, "input.volume", "volvol needs a volume column")
        _require(_pos_int(v["max_lag"]), "volvol.max_lag", "must be a positive integer")
        _require(v["proxy"] in ("squared-return", "rolling-variance"), "volvol.proxy", "unknown proxy")
        w = v["window"] if v["proxy"] == "rolling-variance" else 1
        if v["proxy"] == "rolling-variance":
            _require(_pos_int(w) and w >= 3 and w % 2 == 1, "volvol.window", "must be an odd integer >= 3")
        _require(n_ret >= 2 * v["max_lag"] + w, "volvol.max_lag", "series too short for these lags")
        _require(v["mode"] in ("coefficient", "raw"), "volvol.mode", "must be coefficient or raw")
    if "coarse" in want:
        c = cfg["coarse"]
        _require(_pos_int(c["T"]), "coarse.T", "must be a positive integer")
        _require(_pos_int(c["max_lag"]), "coarse.max_lag", "must be a positive integer")
        _require(n_prices > c["T"] + c["max_lag"] and n_prices - c["T"] >= 2 * c["max_lag"], "coarse.T",
                 f"series of {n_prices} prices too short for T={c['T']} and max_lag={c['max_lag']}")
        _require(c["mode"] in ("coefficient", "raw"), "coarse.mode", "must be coefficient or raw")
    if "omori" in want:
        o = cfg["omori"]
        _require(isinstance(o["threshold_sigmas"], (int, float)) and o["threshold_sigmas"] > 0,
                 "omori.threshold_sigmas", "must be positive")
        ots = o["onset_threshold_sigmas"]
        _require(ots is None or (isinstance(ots, (int, float)) and ots > 0), "omori.onset_threshold_sigmas",
                 "must be positive or null")
        _require(o["min_gap"] is None or _pos_int(o["min_gap"]), "omori.min_gap", "must be a positive integer")
        _require(o["catalog"] is None or os.path.exists(o["catalog"]), "omori.catalog", "file not found")
        _require(isinstance(o["delta"], (int, float)) and o["delta"] > 0, "omori.delta", "must be positive")
    if "gutenberg" in want:
        g = cfg["gutenberg"]
        _require(_pos_int(g["n_thresholds"]) and g["n_thresholds"] >= 3, "gutenberg.n_thresholds",
                 "must be an integer >= 3")
        _require(_pos_int(g["min_count"]), "gutenberg.min_count", "must be a positive integer")
        _require(g["min_count"] <= n_ret, "gutenberg.min_count", "exceeds the number of returns")
    if "persistence" in want:
        p = cfg["persistence"]
        _require(_pos_int(p["n_starts"]), "persistence.n_starts", "must be a positive integer")
        _require(_pos_int(p["max_duration"]), "persistence.max_duration", "must be a positive integer")
        _require(n_prices > p["max_duration"] + 1, "persistence.max_duration",
                 f"must be below {n_prices - 1}")
        lo, hi = p["fit_range"]
        _require(_pos_int(lo) and _pos_int(hi) and lo < hi <= p["max_duration"], "persistence.fit_range",
                 "must satisfy 1 <= lo < hi <= max_duration")


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


class _Table:
    """A CSV file kept in memory until the run succeeds."""

    def __init__(self, name, header, columns):
        self.name = name
        self.header = header
        self.columns = [np.asarray(c) for c in columns]

    def render(self) -> str:
        lines = [",".join(self.header)]
        for row in zip(*self.columns):
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return ""
    return repr(f)


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_density(series, r, cfg, seed):
    d = cfg["density"]
    est = kde_epanechnikov(r, d["grid_size"], d["bandwidth"], d["bandwidth_rule"])
    g = fit_gaussian(r)
    gauss_pdf = np.exp(-0.5 * ((est.grid - g.location) / g.scale) ** 2) / (g.scale * math.sqrt(2 * math.pi))
    result = {"bandwidth": est.bandwidth, "bandwidth_rule": est.rule, "grid_size": int(est.grid.size),
              "integral": est.integral(), "gaussian": g.as_dict()}
    cols = [est.grid, est.density, gauss_pdf]
    header = ["grid", "kde", "gaussian"]
    if cfg["tails"]["student_t"] and r.size >= 50:
        t = fit_student_t(r)
        result["student_t"] = t.as_dict()
        cols.append(stats.t.pdf(est.grid, t.dof, loc=t.location, scale=t.scale))
        header.append("student_t")
    return result, [_Table("density.csv", header, cols)]


def _run_tails(series, r, cfg, seed):
    t = cfg["tails"]
    result, tables = {"tail_fraction": t["tail_fraction"]}, []
    for branch, key in (("positive-tail", "positive"), ("negative-tail", "negative")):
        curve = ccdf(r, branch, t["min_count"])
        fit = fit_tail_exponent(curve, t["tail_fraction"])
        result[key] = fit.as_dict()
        tables.append(_Table(f"ccdf_{key}.csv", ["threshold", "survival"], [curve.thresholds, curve.survival]))
    if t["student_t"] and "density" not in cfg["analyses"] and r.size >= 50:
        result["student_t"] = fit_student_t(r).as_dict()
    return result, tables


def _run_moments(series, r, cfg, seed):
    cps = cfg["moments"]["checkpoints"] or default_checkpoints(r.size)
    trace = running_second_moment(r, cps)
    tail = trace.moment_values[trace.lengths >= trace.lengths[-1] // 2]
    result = {"final_second_moment": float(trace.moment_values[-1]),
              "plateau_second_moment": float(np.mean(tail)),
              "n_checkpoints": int(trace.lengths.size)}
    return result, [_Table("second_moment.csv", ["length", "second_moment"], [trace.lengths, trace.moment_values])]


def _run_kurtosis(series, r, cfg, seed):
    k = cfg["kurtosis"]
    stats = kurtosis_by_scale(series, k["taus"], BootstrapConfig(k["n_samples"], k["sample_size"], seed))
    rows = [dict(zip(("tau", "mean", "variance", "excess_kurtosis", "stderr"), s.as_row())) for s in stats]
    cols = list(zip(*[s.as_row() for s in stats]))
    return ({"scales": rows, "n_samples": k["n_samples"], "sample_size": k["sample_size"]},
            [_Table("kurtosis_by_scale.csv", ["tau", "mean", "variance", "excess_kurtosis", "stderr"], cols)])


def _run_taylor(series, r, cfg, seed):
    taus, means, variances = scale_moments(series, sorted(set(cfg["taylor"]["taus"])))
    lam = fit_taylor_pairs(means, variances, taus)
    gamma = power_law_fit(taus.astype(float), variances)
    fitted = lam.prefactor * means ** lam.exponent
    return ({"lambda": lam.as_dict(), "gamma": gamma.as_dict()},
            [_Table("taylor.csv", ["tau", "mean", "variance", "fit"], [taus, means, variances, fitted])])


def _run_acf(series, r, cfg, seed):
    a = cfg["acf"]
    slopes, acf_r, acf_r2 = volatility_clustering_slopes(r, a["fit_lag_range"], a["strict"])
    if a["max_lag"] > acf_r.lags[-1]:
        acf_r = autocorrelation(r, a["max_lag"], "acf-returns")
        acf_r2 = autocorrelation(r * r, a["max_lag"], "acf-volatility")
    result = slopes.as_dict()
    result["noise_band"] = acf_r.noise_band
    return result, [_Table("acf.csv", ["lag", "acf_r", "acf_r2"], [acf_r.lags, acf_r.values, acf_r2.values])]


def _run_volvol(series, r, cfg, seed):
    v = cfg["volvol"]
    curve = volume_volatility_correlation(series, v["max_lag"], v["proxy"], v["window"], v["mode"])
    i = int(np.argmax(curve.values))
    return ({"peak_lag": int(curve.lags[i]), "peak_value": float(curve.values[i]),
             "value_at_zero": curve.at(0), "min_value": float(curve.values.min()),
             "noise_band": curve.noise_band, "proxy": v["proxy"], "mode": v["mode"]},
            [_Table("volume_volatility.csv", ["lag", "value"], [curve.lags, curve.values])])


def _run_coarse(series, r, cfg, seed):
    c = cfg["coarse"]
    curve = coarse_fine_correlation(series, c["T"], c["max_lag"], c["mode"])
    lags, delta = curve.asymmetry()
    i = int(np.argmax(np.abs(delta)))
    return ({"T": c["T"], "max_abs_asymmetry": float(abs(delta[i])), "max_asymmetry_lag": int(lags[i]),
             "asymmetry_at_max": float(delta[i]), "noise_band": curve.noise_band,
             "mean_asymmetry": float(delta[1:].mean()) if delta.size > 1 else 0.0},
            [_Table("coarse_fine.csv", ["lag", "value"], [curve.lags, curve.values]),
             _Table("coarse_fine_asymmetry.csv", ["lag", "asymmetry"], [lags, delta])])


def _run_omori(series, r, cfg, seed):
    o = cfg["omori"]
    counter = event_counter(r, o["threshold_sigmas"])
    min_gap = o["min_gap"] or max(1, 86400 // series.cadence)
    if o["catalog"]:
        catalog = EventCatalog.from_csv(o["catalog"])
    else:
        ots = o["onset_threshold_sigmas"] or o["threshold_sigmas"]
        catalog = detect_onsets(r, ots, min_gap)
    result = {"threshold": counter.threshold, "threshold_sigmas": o["threshold_sigmas"],
              "n_events": int(counter.counts[-1]), "min_gap": int(catalog.min_gap),
              "catalog_source": "file" if o["catalog"] else "detected"}
    fit = fit_omori(counter, catalog, o["delta"])
    result.update(fit.as_dict())
    model = omori_model(counter.times, fit.onsets, fit.amplitude_per_onset, fit.p, fit.delta)
    absr = np.concatenate((np.abs(r), [np.nan]))
    return result, [_Table("omori_counter.csv", ["t", "abs_return", "counter", "fit"],
                           [counter.times, absr, counter.counts, model]),
                    _Table("omori_catalog.csv", ["onset_index", "magnitude"], [catalog.onsets, catalog.magnitudes])]


def _run_gutenberg(series, r, cfg, seed):
    g = cfg["gutenberg"]
    fit = fit_gutenberg_richter(r, g["n_thresholds"], g["min_count"],
                                tuple(g["magnitude_range"]) if g["magnitude_range"] else None)
    m = np.abs(r)
    lo, hi = g["magnitude_range"] or (float(m.min()), float(m.max()))
    th = np.linspace(lo, hi, g["n_thresholds"])
    counts = gr_counts(m, th)
    return fit.as_dict(), [_Table("gutenberg_richter.csv", ["magnitude", "count", "fit"],
                                  [th, counts, 10.0 ** (fit.a - fit.b * th)])]


def _run_persistence(series, r, cfg, seed):
    p = cfg["persistence"]
    curve = persistence_curve(series, p["n_starts"], p["max_duration"], seed)
    fit = fit_persistence_exponent(curve, tuple(p["fit_range"]))
    d = fit.as_dict()
    d["theta_g"] = d.pop("exponent")
    d["theta_g_stderr"] = d.pop("exponent_stderr")
    d.update({"n_samples": curve.n_samples, "censored_count": curve.censored_count,
              "max_duration": p["max_duration"]})
    at_risk = curve.plus_counts + curve.minus_counts
    return d, [_Table("persistence.csv", ["t", "p_plus", "p_minus", "p_global", "n_at_risk"],
                      [curve.durations, curve.p_plus, curve.p_minus, curve.p_global, at_risk])]


RUNNERS = {
    "density": _run_density, "tails": _run_tails, "moments": _run_moments, "kurtosis": _run_kurtosis,
    "taylor": _run_taylor, "acf": _run_acf, "volvol": _run_volvol, "coarse": _run_coarse,
    "omori": _run_omori, "gutenberg": _run_gutenberg, "persistence": _run_persistence,
}


def resolve_output_dir(cfg, explicit=None):
    return explicit or os.environ.get(OUTPUT_ENV) or cfg["output_dir"]


def load_input(cfg):
    inp = cfg["input"]
    if not inp.get("path"):
        raise ConfigInvalid("input.path", "an input CSV is required")
    schema = ColumnSchema(inp["timestamp"], inp["close"], inp["volume"], inp["cadence"])
    return load_csv(inp["path"], schema)


def run(cfg: dict, series=None, clock=None, output_dir=None) -> dict:
    """Validate, execute the requested analyses and write report + CSV files.

    Returns the report dictionary. Nothing is written unless validation and
    every analysis succeed (or ``keep_going`` is set). The output directory
    is ``output_dir`` if given, else the environment override, else the config.
    """
    cfg = copy.deepcopy(cfg)
    if series is None:
        series = load_input(cfg)
    validate(cfg, len(series), series.has_volume)
    out_dir = resolve_output_dir(cfg, output_dir)
    seed = cfg["seed"]
    r = log_returns(series, 1).values
    order = [a for a in ANALYSES if a in cfg["analyses"]]
    results, tables, failures = {}, [], []
    for name in order:
        try:
            res, tabs = RUNNERS[name](series, r, cfg, seed)
        except StylizedFactsError as exc:
            if not cfg["keep_going"]:
                raise AnalysisFailed(name, exc) from exc
            failures.append(AnalysisFailed(name, exc))
            results[name] = {"error": type(exc).__name__, "message": str(exc)}
            continue
        results[name] = res
        tables.extend((name, t) for t in tabs)
    tables.insert(0, ("input", _Table("prices_returns.csv", ["timestamp", "log_price", "log_return"],
                                      [series.timestamps, np.log(series.prices), np.concatenate(([np.nan], r))])))

    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for analysis, table in tables:
        text = table.render()
        with open(os.path.join(out_dir, table.name), "w") as fh:
            fh.write(text)
        manifest.append({"file": table.name, "analysis": analysis,
                         "sha256": hashlib.sha256(text.encode()).hexdigest()})
    inp = cfg["input"]
    now = clock() if clock else datetime.now(timezone.utc)
    report = {
        "generated_at": now.isoformat(),
        "provenance": {
            "tool": "stylized-facts",
            "tool_version": __version__,
            "input_sha256": file_digest(inp["path"]) if inp.get("path") else None,
            "n_prices": len(series),
            "cadence": series.cadence,
            "seed": seed,
        },
        "config": cfg,
        "results": results,
        "manifest": manifest,
    }
    report = _clean(report)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if failures:
        raise failures[0]
    return report


def flatten_results(report: dict):
    """``(analysis, quantity, value)`` rows for every scalar in the results block."""
    rows = []

    def walk(prefix, node, analysis):
        if isinstance(node, dict):
            for k in sorted(node):
                walk(f"{prefix}.{k}" if prefix else k, node[k], analysis)
        elif isinstance(node, list):
            if all(not isinstance(v, (dict, list)) for v in node) and len(node) <= 4:
                rows.append((analysis, prefix, " ".join("" if v is None else repr(v) for v in node)))
            else:
                for i, v in enumerate(node):
                    walk(f"{prefix}[{i}]", v, analysis)
        else:
            rows.append((analysis, prefix, "" if node is None else node if isinstance(node, str) else repr(node)))

    for analysis in sorted(report.get("results", {})):
        walk("", report["results"][analysis], analysis)
    return rows
