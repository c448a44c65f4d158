"""
Command-line front end.

Every run writes exactly one JSON report (schema ``mfa-report/1``) to
``--report`` or standard output. Exit codes: 0 success, 1 validation
error, 2 compute error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Optional

import numpy as np

from . import __version__, boxmethods, crossmethods, fluctmethods, generators, inference, surrogates
from .core import (MfError, MfSpectrum, Series, ValidationError, make_qgrid, make_scales)

SCHEMA = "mfa-report/1"
SIG = 12


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def parse_grid(text: str):
    """``lo:hi:step`` to an inclusive q grid."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ValidationError(f"grid must be lo:hi:step, got {text!r}") from None
    return make_qgrid(lo, hi, step)


def parse_range(text: Optional[str]):
    if text is None:
        return None
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise ValidationError(f"range must be lo:hi, got {text!r}") from None
    if not 0 < lo < hi:
        raise ValidationError("range needs 0 < lo < hi")
    return (lo, hi)


def _ratio(preset: str) -> float:
    name, _, arg = preset.partition(":")
    if name == "geometric" and arg:
        try:
            return float(arg)
        except ValueError:
            raise ValidationError(f"bad geometric ratio {arg!r}") from None
    if arg:
        raise ValidationError(f"preset {name!r} takes no argument")
    return 2 ** 0.25


def build_scales(preset: str, n: int, smin: int, smax: Optional[int]):
    """Scale presets: ``dyadic``, ``divisors`` or ``geometric:ratio``."""
    return make_scales(n, preset.partition(":")[0], smin, smax or n // 4, ratio=_ratio(preset))


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _split(line: str):
    return [c.strip() for c in line.split(",")] if "," in line else line.split()


def ingest_csv(path: str, column: int = 1, role: str = "increments", log_returns: bool = False,
               as_volatility: bool = False, drop_nan: bool = False, warn: Optional[list] = None) -> Series:
    """Read one numeric column from a comma or whitespace delimited file.

    ``column`` is 1-based. A first row that does not parse as numbers is
    taken as a header. Blank or non-numeric rows fail with their row
    number unless ``drop_nan`` is set, in which case they are skipped and
    counted in ``warn``.
    """
    warn = [] if warn is None else warn
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None
    if column < 1:
        raise ValidationError("--column is 1-based")
    vals = []
    dropped = 0
    for i, line in enumerate(lines, start=1):
        cells = _split(line)
        cell = cells[column - 1] if len(cells) >= column else ""
        try:
            v = float(cell)
            ok = math.isfinite(v)
        except ValueError:
            ok = False
            if i == 1 and cells and cell:
                continue  # header
        if not ok:
            if drop_nan:
                dropped += 1
                continue
            raise ValidationError(f"{path}: row {i}: non-numeric or missing value {cell!r} "
                                  "(use --drop-nan to skip)")
        vals.append(v)
    if dropped:
        warn.append(f"dropped {dropped} non-numeric row(s) from {path}")
    v = np.asarray(vals, float)
    if log_returns:
        if np.any(v <= 0):
            raise ValidationError("log returns need strictly positive prices")
        v = np.diff(np.log(v))
        role = "increments"
    if as_volatility:
        a = np.abs(v)
        if not a.sum() > 0:
            raise ValidationError("volatility measure has zero total mass")
        v = a / a.sum()
        role = "measure"
    return Series(v, role, path)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{SIG}g}") if math.isfinite(x) else None
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=False, allow_nan=False) + "\n"


def _spectrum_dict(spec: MfSpectrum) -> dict:
    return {"q": spec.q, "tau": spec.tau, "h": spec.h, "alpha": spec.alpha, "f": spec.f_alpha,
            "D": spec.d_q, "r_squared": spec.r_squared, "stderr": spec.stderr}


def _widths(spec: MfSpectrum) -> dict:
    try:
        return inference.strength_measures(spec)
    except ValidationError:
        return dict(spec.widths)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load(a, warn, path=None, column=None) -> Series:
    if not (path or a.input):
        raise ValidationError("--input is required")
    return ingest_csv(path or a.input, column or a.column, a.role, a.log_returns,
                      a.as_volatility, a.drop_nan, warn)


def _fit_range(a, scales, log_rows, out):
    if a.range is not None:
        return parse_range(a.range)
    if a.range_policy == "full":
        return None
    sel = inference.select_range(np.asarray(scales, float), log_rows,
                                 inference.RangePolicy(a.range_policy, min_decade=a.min_decade))
    out["range_selection"] = {"policy": sel.kind, "s_lo": sel.s_lo, "s_hi": sel.s_hi,
                              "score": sel.score}
    return (sel.s_lo, sel.s_hi)


def _detrend_cfg(a):
    if a.method in ("mfdma", "dcca-dma"):
        return fluctmethods.DetrendConfig("dma", theta=a.theta)
    return fluctmethods.DetrendConfig("dfa", a.order)


def cmd_analyze(a, warn):
    x = _load(a, warn)
    q = parse_grid(a.q)
    n = x.values.size
    out = {"n": n, "method": a.method}
    if a.method == "wl":
        surf = fluctmethods.wavelet_leaders(x, q)
        warn.extend(surf.flags)
        spec = fluctmethods.fluct_exponents(surf, parse_range(a.range))
    elif a.method == "multiplier":
        spec = boxmethods.multiplier_spectrum(x, a.base, q)
    else:
        scales = build_scales(a.scales, n, a.smin, a.smax)
        out["scales"] = scales.scales
        if a.method in ("mfpf", "direct"):
            cov = "continuous" if a.scales != "divisors" and any(n % s for s in scales) else "divisors"
            ps = boxmethods.partition_function(x, scales, q, covering=cov)
            rng = _fit_range(a, scales.scales, ps.log_chi, out)
            spec = boxmethods.mass_exponents(ps, rng)
            if a.method == "direct":
                ds = boxmethods.direct_spectrum(x, scales, q, covering=cov, range=rng)
                out["direct"] = {"q": ds.q, "alpha": ds.alpha, "f": ds.f, "tau": ds.tau,
                                 "alpha_stderr": ds.alpha_stderr, "f_stderr": ds.f_stderr}
        elif a.method in ("mfdfa", "mfdma"):
            surf = fluctmethods.detrended_fluctuation(x, scales, q, _detrend_cfg(a))
            warn.extend(surf.flags)
            spec = fluctmethods.fluct_exponents(surf, _fit_range(a, scales.scales, surf.log_F, out))
        elif a.method in ("mfsf", "mffa"):
            fn = fluctmethods.structure_function if a.method == "mfsf" else fluctmethods.mf_fa
            surf = fn(x, scales, q)
            warn.extend(surf.flags)
            spec = fluctmethods.fluct_exponents(surf, _fit_range(a, scales.scales, surf.log_F, out))
        else:
            raise ValidationError(f"unknown method {a.method!r}")
    out["fit_range"] = spec.fit_range
    out["spectrum"] = _spectrum_dict(spec)
    out["widths"] = _widths(spec)
    return out


def cmd_cross(a, warn):
    x = _load(a, warn)
    y = _load(a, warn, a.input2, a.column2 or (a.column if a.input2 else a.column + 1))
    if x.values.size != y.values.size:
        raise ValidationError(f"series lengths differ: {x.values.size} vs {y.values.size}")
    q = parse_grid(a.q)
    n = x.values.size
    scales = build_scales(a.scales, n, a.smin, a.smax)
    rng = parse_range(a.range)
    out = {"n": n, "method": a.method, "scales": scales.scales}
    if a.method == "mfxpf":
        js = crossmethods.mfx_pf(x, y, q, q, scales, covering="divisors" if a.scales == "divisors"
                                 else "continuous", range=rng)
        out["joint"] = {"p": js.ps, "q": js.qs, "tau_xy": js.tau_xy, "alpha_x": js.alpha_x,
                        "alpha_y": js.alpha_y, "f_xy": js.f_xy}
        return out
    if a.method in ("mfdcca", "dcca-dma"):
        res = crossmethods.mf_dcca(x, y, scales, q, _detrend_cfg(a), rng)
    elif a.method == "mfcca":
        res = crossmethods.mf_cca(x, y, scales, q, _detrend_cfg(a), rng)
    elif a.method == "mfxsf":
        res = crossmethods.mfx_sf(x, y, q, scales, rng)
    elif a.method == "mfdpxa":
        if not a.input3:
            raise ValidationError("mfdpxa needs --input3 with the common driver")
        z = _load(a, warn, a.input3, 1)
        res = crossmethods.mf_dpxa(x, y, z.values[:, None], scales, q, None, rng)
    else:
        raise ValidationError(f"unknown cross method {a.method!r}")
    warn.extend(res.flags)
    out["joint"] = {"q": res.qs, "h_xy": res.h_xy, "tau_xy": res.tau_xy,
                    "r_squared": res.r_squared, "signs": res.signs, "scaling": res.scaling}
    if res.method != "mfxsf":
        rc = crossmethods.rho_curves(x, y, scales, None, _detrend_cfg(a))
        out["rho_dcca"] = rc.rho
    return out


STOCHASTIC_MODELS = ("fgn", "mrw", "msm", "semf", "mmar", "levy", "lognormal", "arfima-pair",
                     "stochastic-multinomial")


def _generate_series(a):
    m = a.model
    if m == "pmodel":
        return [generators.gen_binomial(a.m, a.levels)]
    if m == "multinomial":
        return [generators.gen_multinomial(_floats(a.weights), a.levels)]
    if m == "stochastic-multinomial":
        rows = np.array([_floats(r) for r in a.weights.split(";")])
        return [generators.gen_stochastic_multinomial(rows, _floats(a.probs), a.levels, a.seed)]
    if m == "lognormal":
        return [generators.gen_lognormal_cascade(None, a.sigma, a.levels, a.seed)]
    if m == "fgn":
        return [generators.gen_fgn(a.H, a.n, a.seed)]
    if m == "mrw":
        return [generators.gen_mrw(generators.MrwSpec(a.lambda2, a.sigma, a.T, a.n, a.seed))]
    if m == "msm":
        return [generators.gen_msm(generators.MsmSpec(kbar=a.kbar, b=a.b, gamma_kbar=a.gamma_kbar,
                                                      lam=a.lam, sigma=a.sigma, n=a.n, seed=a.seed))]
    if m == "semf":
        return [generators.gen_semf(generators.SemfSpec(a.sigma, a.phi, a.h0, a.n, a.seed))]
    if m == "mmar":
        spec = generators.CascadeSpec("deterministic_binomial", np.array([a.m]), levels=a.levels)
        return [generators.gen_mmar(a.H, spec, a.n, a.seed)]
    if m == "levy":
        return [generators.gen_levy(a.gamma, a.n, a.seed)]
    if m == "arfima-pair":
        return list(generators.gen_arfima_pair(a.d1, a.d2, a.W, a.n, a.seed))
    raise ValidationError(f"unknown model {m!r}")


def _floats(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except (AttributeError, ValueError):
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _write_columns(path, cols, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([f"{v:.17g}" for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def cmd_generate(a, warn):
    if a.model in STOCHASTIC_MODELS and a.seed is None:
        raise ValidationError(f"--seed is required for stochastic model {a.model!r}")
    series = _generate_series(a)
    if a.output:
        names = ["x", "y"] if len(series) == 2 else ["value"]
        _write_columns(a.output, [s.values for s in series], names)
    return {"model": a.model, "n": series[0].values.size, "role": series[0].role,
            "output": a.output, "summary": [{"mean": s.values.mean(), "std": s.values.std(),
                                             "min": s.values.min(), "max": s.values.max()}
                                            for s in series]}


def _surrogate_params(a):
    if a.kind == "iaaft":
        return {"max_iter": a.max_iter}
    if a.kind == "rank_remap":
        return {"law": a.law}
    return {}


def cmd_surrogate(a, warn):
    if a.seed is None:
        raise ValidationError("--seed is required for surrogate generation")
    x = _load(a, warn)
    ens = surrogates.make_ensemble(x, surrogates.SurrogateMethod(a.kind, _surrogate_params(a)),
                                   a.n, a.seed)
    meta = []
    for s, rep in zip(ens.seeds, ens.replicates):
        d = {"seed": s}
        for k in ("spectral_error", "iterations", "converged", "flag"):
            if k in rep.meta:
                d[k] = rep.meta[k]
        if rep.meta.get("converged") is False:
            warn.append(f"IAAFT replicate seed={s} did not converge "
                        f"(spectral error {rep.meta['spectral_error']:.3g})")
        if "flag" in rep.meta:
            warn.append(f"replicate seed={s}: {rep.meta['flag']}")
        meta.append(d)
    if a.output:
        _write_columns(a.output, [r.values for r in ens.replicates],
                       [f"s{s}" for s in ens.seeds])
    return {"kind": a.kind, "n": ens.count, "length": x.values.size, "output": a.output,
            "replicates": meta}


def _estimator(a):
    m = {"mfdfa": "mfdfa", "mfdma": "mfdma", "mfpf": "mfpf", "mfsf": "mfsf", "mffa": "mffa",
         "wl": "wl"}.get(a.method)
    if m is None:
        raise ValidationError(f"method {a.method!r} is not available for tests")
    q = [float(t) for t in a.q.split(":")]
    if len(q) != 3:
        raise ValidationError("grid must be lo:hi:step")
    return inference.EstimatorConfig(m, a.order, a.theta, tuple(q), a.scales.partition(":")[0],
                                     a.smin, a.smax,
                                     parse_range(a.range), ratio=_ratio(a.scales))


def cmd_test(a, warn):
    if a.seed is None:
        raise ValidationError("--seed is required for surrogate tests")
    x = _load(a, warn)
    meth = surrogates.SurrogateMethod(a.null, {"max_iter": a.max_iter} if a.null == "iaaft" else {})
    rep = inference.significance_test(x, a.statistic, meth, a.n, _estimator(a), a.seed)
    if rep.failures:
        warn.append(f"estimator failed on {rep.failures} null replicate(s)")
    return {"statistic": rep.statistic, "observed": rep.observed, "p_value": rep.p_value,
            "null": rep.method, "n": rep.n, "null_mean": rep.null_mean, "null_std": rep.null_std,
            "null_values": rep.null_values, "failures": rep.failures}


def cmd_decompose(a, warn):
    if a.seed is None:
        raise ValidationError("--seed is required for decomposition")
    x = _load(a, warn)
    d = inference.decompose_components(x, _estimator(a), a.n, a.seed, a.convention, a.max_iter)
    if d.details["failures"]:
        warn.append(f"estimator failed on {d.details['failures']} replicate(s)")
    return {"delta_alpha": d.delta_alpha_total, "nl": d.nl, "lm": d.lm, "pdf": d.pdf,
            "effective": d.effective, "nl_share": d.nl_share, "n": a.n,
            "convention": a.convention}


COMMANDS = {"analyze": cmd_analyze, "cross": cmd_cross, "generate": cmd_generate,
            "surrogate": cmd_surrogate, "test": cmd_test, "decompose": cmd_decompose}


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _input_args(p, two=False):
    p.add_argument("--input", help="CSV file")
    p.add_argument("--column", type=int, default=1, help="1-based column")
    p.add_argument("--role", choices=["increments", "levels", "measure"], default="increments")
    p.add_argument("--log-returns", action="store_true", help="treat values as prices, use ln differences")
    p.add_argument("--as-volatility", action="store_true", help="normalize |values| to a unit-mass measure")
    p.add_argument("--drop-nan", action="store_true", help="skip non-numeric rows instead of failing")
    if two:
        p.add_argument("--input2", help="second series file (default: next column of --input)")
        p.add_argument("--column2", type=int)
        p.add_argument("--input3", help="driver series for mfdpxa")


def _grid_args(p, methods, default):
    p.add_argument("--method", choices=methods, default=default)
    p.add_argument("--order", type=int, default=1, help="DFA detrending order")
    p.add_argument("--theta", type=float, default=0.0, help="DMA window position")
    p.add_argument("--q", default="-4:4:0.25", help="moment grid lo:hi:step")
    p.add_argument("--scales", default="dyadic", help="dyadic | divisors | geometric:ratio")
    p.add_argument("--smin", type=int, default=16)
    p.add_argument("--smax", type=int)
    p.add_argument("--range", help="fixed fit range lo:hi")
    p.add_argument("--range-policy", choices=["full", "brute_r2", "slope_flatness"], default="full")
    p.add_argument("--min-decade", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mfkit", description="Multifractal analysis toolkit")
    p.add_argument("--version", action="version", version=f"mfkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--report", help="JSON report path (default: stdout)")
        sp.add_argument("--seed", type=int)
        return sp

    sp = add("analyze", "multifractal spectrum of one series")
    _input_args(sp)
    _grid_args(sp, ["mfdfa", "mfdma", "mfpf", "direct", "mfsf", "mffa", "wl", "multiplier"], "mfdfa")
    sp.add_argument("--base", type=int, default=2, help="multiplier base")

    sp = add("cross", "joint multifractal analysis of two series")
    _input_args(sp, two=True)
    _grid_args(sp, ["mfdcca", "dcca-dma", "mfcca", "mfxsf", "mfxpf", "mfdpxa"], "mfdcca")

    sp = add("generate", "simulate a model and write it as CSV")
    sp.add_argument("--model", required=True,
                    choices=["pmodel", "multinomial", "stochastic-multinomial", "lognormal", "fgn",
                             "mrw", "msm", "semf", "mmar", "levy", "arfima-pair"])
    sp.add_argument("--output", help="CSV output path")
    sp.add_argument("--m", type=float, default=0.3)
    sp.add_argument("--weights", help="multinomial weights a,b,..; rows separated by ';'")
    sp.add_argument("--probs", help="row probabilities for stochastic-multinomial")
    sp.add_argument("--levels", type=int, default=16)
    sp.add_argument("--n", type=int, default=2 ** 14)
    sp.add_argument("--H", type=float, default=0.5)
    sp.add_argument("--lambda2", type=float, default=0.05)
    sp.add_argument("--T", type=int)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--kbar", type=int, default=8)
    sp.add_argument("--b", type=float, default=2.0)
    sp.add_argument("--gamma-kbar", type=float, default=0.5)
    sp.add_argument("--lam", type=float, default=1.1)
    sp.add_argument("--phi", type=float, default=0.1)
    sp.add_argument("--h0", type=float, default=0.2)
    sp.add_argument("--gamma", type=float, default=1.5, help="Levy stable index")
    sp.add_argument("--d1", type=float, default=0.4)
    sp.add_argument("--d2", type=float, default=0.4)
    sp.add_argument("--W", type=float, default=1.0)

    sp = add("surrogate", "surrogate replicates of a series")
    _input_args(sp)
    sp.add_argument("--kind", choices=list(surrogates.KINDS), default="iaaft")
    sp.add_argument("--law", choices=["gaussian", "weibull", "student"], default="gaussian")
    sp.add_argument("-n", "--n", type=int, default=1)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--output", help="CSV with one column per replicate")

    sp = add("test", "surrogate significance test of multifractality")
    _input_args(sp)
    _grid_args(sp, ["mfdfa", "mfdma", "mfpf", "mfsf", "mffa", "wl"], "mfdfa")
    sp.add_argument("--statistic", choices=list(inference.STATISTICS), default="delta_alpha")
    sp.add_argument("--null", choices=["iaaft", "shuffle", "aaft", "ft_phase"], default="iaaft")
    sp.add_argument("-n", "--n", type=int, default=100)
    sp.add_argument("--max-iter", type=int, default=1000)

    sp = add("decompose", "split the spectrum width into NL, LM and PDF parts")
    _input_args(sp)
    _grid_args(sp, ["mfdfa", "mfdma", "mfpf", "mfsf", "mffa", "wl"], "mfdfa")
    sp.add_argument("-n", "--n", type=int, default=20)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--convention", choices=["zhou", "chen"], default="zhou")
    return p


def _config_echo(a) -> dict:
    return {k: v for k, v in sorted(vars(a).items()) if k not in ("report",)}


_VALUE_OPTS = ("--q", "--range")


def _join_negative(argv):
    # "--q -4:4:1" would otherwise be read as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run(argv=None, stdout=None, stderr=None) -> int:
    """Parse, dispatch and write the report. Returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = _join_negative(list(sys.argv[1:] if argv is None else argv))
    try:
        a = build_parser().parse_args(argv)
    except ValidationError as e:
        print(f"mfkit: error: {e}", file=stderr)
        stdout.write(dump_report({"schema": SCHEMA, "version": __version__, "command": None,
                                  "error": {"type": "ValidationError", "message": str(e)},
                                  "warnings": [], "status": "error"}))
        return 1
    warn: list = []
    report = {"schema": SCHEMA, "version": __version__, "command": a.command,
              "config": _config_echo(a)}
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            np.seterr(all="ignore")
            report["result"] = COMMANDS[a.command](a, warn)
        except ValidationError as e:
            code, report["error"] = 1, {"type": type(e).__name__, "message": str(e)}
        except (MfError, NotImplementedError, ArithmeticError, np.linalg.LinAlgError) as e:
            code, report["error"] = 2, {"type": type(e).__name__, "message": str(e)}
    seen = set()
    for w in caught:
        msg = str(w.message)
        if msg not in seen:
            seen.add(msg)
            warn.append(msg)
    report["warnings"] = warn
    report["status"] = "ok" if code == 0 else "error"
    if code:
        print(f"mfkit: {report['error']['type']}: {report['error']['message']}", file=stderr)
    text = dump_report(report)
    if a.report:
        with open(a.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main(argv=None):
    sys.exit(run(argv))
