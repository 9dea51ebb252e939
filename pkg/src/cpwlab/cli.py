"""Command-line entry point: ``cpwlab <command> [flags]``.

Exit codes: 0 success, 1 fit failure or no design solution, 2 usage,
validation, I/O or schema error, 3 partial batch failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import cpw, devices, fitting, s21, tls
from .errors import (CpwlabError, FitFailure, NoSolutionError,
                     UnphysicalParametersError)
from .records import dumps_record, load_config, read_records

EXIT_FIT = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


class _UsageError(Exception):
    pass


def _emit(record, out):
    out.write(dumps_record(record) + "\n")


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- design -----------------------------------------------------------------

def cmd_design(args, cfg, out):
    eps_r = cfg.eps_r if args.eps_r is None else args.eps_r
    if args.subject == "line":
        if args.gap is None:
            raise _UsageError("design line requires --gap")
        if args.w is None and args.target_z0 is None:
            raise _UsageError("design line requires --w or --target-z0")
        rec = {}
        w = args.w
        if w is None:
            w = cpw.width_for_impedance(args.target_z0, args.gap, eps_r, args.trench_depth)
            rec["target_z0"] = args.target_z0
        geom = cpw.CpwGeometry(w, args.gap, args.trench_depth, eps_r)
        lp = cpw.line_params(geom)
        rec.update({"w": w, "gap": args.gap, "trench_depth": args.trench_depth, "eps_r": eps_r,
                    "z0": lp.z0, "eps_eff": lp.eps_eff, "v_ph": lp.v_ph,
                    "c_per_len": lp.c_per_len, "l_per_len": lp.l_per_len})
    elif args.subject == "resonator":
        if args.w is None or args.gap is None:
            raise _UsageError("design resonator requires --w and --gap")
        if (args.length is None) == (args.f0 is None):
            raise _UsageError("design resonator requires exactly one of --length, --f0")
        geom = cpw.CpwGeometry(args.w, args.gap, args.trench_depth, eps_r)
        if args.length is not None:
            length, f0 = args.length, cpw.resonator_frequency(args.length, geom)
        else:
            f0, length = args.f0, cpw.length_for_frequency(args.f0, geom)
        rec = {"w": args.w, "gap": args.gap, "trench_depth": args.trench_depth, "eps_r": eps_r,
               "eps_eff": cpw.eps_eff_trenched(geom), "length": length, "f0": f0,
               "mode": "quarter-wave"}
    else:
        if args.f0 is None:
            raise _UsageError("design coupling requires --f0")
        if (args.target_qc is None) == (args.c_kappa is None):
            raise _UsageError("design coupling requires exactly one of --target-qc, --c-kappa")
        if args.target_qc is not None:
            ck = cpw.coupling_for_qc(args.target_qc, args.f0, args.z_res, args.z_feed)
        else:
            ck = args.c_kappa
        rec = {"f0": args.f0, "z_res": args.z_res, "z_feed": args.z_feed, "c_kappa": ck,
               "q_c": cpw.qc_capacitive(ck, args.f0, args.z_res, args.z_feed)}
    _emit(rec, out)
    return 0


# -- synth ------------------------------------------------------------------

def cmd_synth(args, cfg, out):
    if (args.ql is None) == (args.qi is None):
        raise _UsageError("synth requires exactly one of --ql, --qi")
    env = {"env_a": args.a, "env_alpha": args.alpha, "env_tau": args.tau}
    if args.ql is not None:
        p = s21.NotchParams(args.f0, args.ql, args.qc, args.phi, **env)
    else:
        p = s21.NotchParams.from_internal(args.f0, args.qi, args.qc, args.phi, **env)
    center = args.f0 if args.center is None else args.center
    span = args.span if args.span is not None else 10.0 * args.f0 / p.q_l
    meta = {}
    if args.power_dbm is not None:
        meta["power_dbm"] = repr(args.power_dbm)
    if args.temperature is not None:
        meta["temperature_k"] = repr(args.temperature)
    trace = s21.synth_trace(p, center, span, args.n_points, args.noise, args.seed, meta)
    _write_text(args.output, s21.write_trace_csv(trace))
    return 0


# -- fit --------------------------------------------------------------------

def _fit_plot_csv(trace, result):
    model = s21.notch_s21(result.params, trace.freqs)
    lines = ["freq_hz,re_s21,im_s21,re_model,im_model"]
    for f, z, m in zip(trace.freqs, trace.s21, model):
        lines.append(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r},"
                     f"{float(m.real)!r},{float(m.imag)!r}")
    return "\n".join(lines) + "\n"


def cmd_fit(args, cfg, out):
    opts = fitting.FitOptions(max_iter=cfg.fit_max_iter, xtol=cfg.fit_xtol,
                              delay=args.delay, no_resonance_factor=cfg.no_resonance_factor,
                              check_physical=not args.allow_unphysical)
    traces = []
    for path in args.files:
        try:
            traces.append(s21.read_trace_csv(_read_text(path)))
        except OSError as exc:
            raise CpwlabError(f"{path}: {exc}") from None
    results = fitting.batch_fit(traces, opts, jobs=args.jobs)
    lines = []
    n_fail = 0
    for path, trace, res in zip(args.files, traces, results):
        if isinstance(res, fitting.FitError):
            n_fail += 1
            rec = {"file": path, "error": res.stage, "message": res.message}
            print(f"cpwlab fit: {path}: stage {res.stage}: {res.message}", file=sys.stderr)
        else:
            rec = res.to_record()
            if len(args.files) > 1:
                rec = {"file": path, **rec}
            if args.plot_csv:
                suffix = "" if len(args.files) == 1 else f".{len(lines)}"
                _write_text(args.plot_csv + suffix, _fit_plot_csv(trace, res))
        lines.append(dumps_record(rec))
    if args.average:
        try:
            lines.append(dumps_record(fitting.average_fits(results, args.average)))
        except CpwlabError as exc:
            print(f"cpwlab fit: {exc}", file=sys.stderr)
    _write_text(args.output, "".join(ln + "\n" for ln in lines))
    if n_fail == 0:
        return 0
    return EXIT_FIT if n_fail == len(results) else EXIT_PARTIAL


# -- photons ----------------------------------------------------------------

def cmd_photons(args, cfg, out):
    atten = cfg.atten_db if args.atten is None else args.atten
    if args.fit_record is not None:
        recs = read_records(_read_text(args.fit_record))
        good = [r for r in recs if "q_l" in r]
        if not good:
            raise CpwlabError(f"{args.fit_record}: no fit record found")
        sources = [(r["f0_hz"], r["q_l"], r["q_c_mag"]) for r in good]
    else:
        if None in (args.f0, args.ql, args.qc):
            raise _UsageError("photons requires --f0, --ql, --qc or --fit-record")
        sources = [(args.f0, args.ql, args.qc)]
    for f0, ql, qc in sources:
        pp = tls.PowerPoint.calibrate(args.p_vna, atten, f0, ql, qc)
        _emit({"p_vna_dbm": pp.p_vna_dbm, "atten_db": pp.atten_db,
               "p_applied_w": pp.p_applied_w, "n_photons": pp.n_photons}, out)
    return 0


# -- tls-fit ----------------------------------------------------------------

def cmd_tls_fit(args, cfg, out):
    temp_k = cfg.temp_k if args.temp_k is None else args.temp_k
    points = tls.read_points_csv(_read_text(args.points))
    fit = tls.fit_tls(points, args.f0, temp_k, max_iter=cfg.fit_max_iter)
    _emit(fit.to_record(args.f0), out)
    if args.plot_csv:
        n = np.geomspace(max(min(p[0] for p in points if p[0] > 0), 1e-3) / 10,
                         max(p[0] for p in points) * 10, 200)
        q = tls.tls_qi(n, fit.params, args.f0)
        _write_text(args.plot_csv, tls.write_points_csv(zip(n, q)))
    return 0


# -- stats ------------------------------------------------------------------

def cmd_stats(args, cfg, out):
    if args.table is None:
        records, errors = devices.load_bundled_table(), []
    else:
        records, errors = devices.parse_device_table(_read_text(args.table))
    for e in errors:
        print(f"cpwlab stats: line {e.line} ({e.device}): {e.message}", file=sys.stderr)
    if args.paper_groups:
        stats = devices.reference_group_stats(records, value=args.value)
    else:
        stats = devices.group_stats(records, value=args.value, f_min_ghz=args.f_min,
                                    f_max_ghz=args.f_max, require=tuple(args.require),
                                    exclude=tuple(args.exclude), group_prefix=args.group_prefix)
    for g in stats.values():
        _emit({**g.to_record(), "value": args.value}, out)
    for a, b in args.ratio or ():
        if a not in stats or b not in stats:
            raise CpwlabError(f"ratio {b}/{a}: group absent after filtering")
        _emit(devices.ratio_report(stats[a], stats[b]).to_record(), out)
    if args.best:
        best = devices.best_device(records, args.value)
        _emit({"best_device": best.device_id, "f_ghz": best.f_ghz,
               "q_lp": best.q_lp, "q_hp": best.q_hp}, out)
    if args.plot_csv:
        rows = ["group,device,f_ghz,value"]
        keep = {g for g in stats}
        for r in records:
            if r.group_label in keep:
                rows.append(f"{r.group_label},{r.device_id},{r.f_ghz!r},{getattr(r, args.value)!r}")
        _write_text(args.plot_csv, "\n".join(rows) + "\n")
    if errors:
        return EXIT_PARTIAL
    return 0


# -- parser -----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="cpwlab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key=value config file (default: $CPWLAB_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="line, resonator and coupling design (SI units)")
    d.add_argument("subject", choices=("line", "resonator", "coupling"))
    d.add_argument("--w", type=float, help="center-trace width [m]")
    d.add_argument("--gap", type=float, help="trace-to-ground gap [m]")
    d.add_argument("--eps-r", type=float, help="substrate permittivity (config default 11.45)")
    d.add_argument("--trench-depth", type=float, default=0.0, help="substrate trench depth [m]")
    d.add_argument("--target-z0", type=float, help="solve for width giving this impedance [ohm]")
    d.add_argument("--length", type=float, help="resonator length [m]")
    d.add_argument("--f0", type=float, help="resonance frequency [Hz]")
    d.add_argument("--target-qc", type=float, help="solve for coupling capacitance")
    d.add_argument("--c-kappa", type=float, help="coupling capacitance [F]")
    d.add_argument("--z-res", type=float, default=50.0, help="resonator impedance [ohm]")
    d.add_argument("--z-feed", type=float, default=50.0, help="feedline impedance [ohm]")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("synth", help="write a synthetic notch trace CSV")
    s.add_argument("--f0", type=float, required=True, help="resonance frequency [Hz]")
    s.add_argument("--ql", type=float, help="loaded Q")
    s.add_argument("--qi", type=float, help="internal Q (alternative to --ql)")
    s.add_argument("--qc", type=float, required=True, help="|Qc|")
    s.add_argument("--phi", type=float, default=0.0, help="mismatch angle [rad]")
    s.add_argument("--a", type=float, default=1.0, help="environment amplitude")
    s.add_argument("--alpha", type=float, default=0.0, help="environment phase [rad]")
    s.add_argument("--tau", type=float, default=0.0, help="cable delay [s]")
    s.add_argument("--center", type=float, help="sweep center [Hz] (default f0)")
    s.add_argument("--span", type=float, help="sweep span [Hz] (default 10 linewidths)")
    s.add_argument("--n-points", type=int, default=201)
    s.add_argument("--noise", type=float, default=0.0, help="noise std per quadrature")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--power-dbm", type=float, help="metadata: VNA power")
    s.add_argument("--temperature", type=float, help="metadata: temperature [K]")
    s.add_argument("-o", "--output", help="output file (default stdout)")
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", help="fit notch traces, one record per file")
    f.add_argument("files", nargs="+", help="trace CSV files ('-' for stdin)")
    f.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    f.add_argument("--delay", type=float, help="fixed cable delay [s]")
    f.add_argument("--allow-unphysical", action="store_true",
                   help="report q_i = inf instead of failing when Qi <= 0")
    f.add_argument("--average", choices=[k for k in fitting.RECORD_FIELDS if k != "converged"],
                   help="append mean and sample std of this field over successful fits")
    f.add_argument("--plot-csv", help="write data and model columns to this CSV")
    f.add_argument("-o", "--output", help="output file (default stdout)")
    f.set_defaults(func=cmd_fit)

    ph = sub.add_parser("photons", help="mean photon number from applied power")
    ph.add_argument("--p-vna", type=float, required=True, help="source power [dBm]")
    ph.add_argument("--atten", type=float, help="line attenuation [dB] (config default 90)")
    ph.add_argument("--f0", type=float, help="resonance frequency [Hz]")
    ph.add_argument("--ql", type=float, help="loaded Q")
    ph.add_argument("--qc", type=float, help="|Qc|")
    ph.add_argument("--fit-record", help="take f0, Ql, Qc from fit output records")
    ph.set_defaults(func=cmd_photons)

    t = sub.add_parser("tls-fit", help="fit the TLS model to n_photons,q_i points")
    t.add_argument("points", help="points CSV ('-' for stdin)")
    t.add_argument("--f0", type=float, required=True, help="resonance frequency [Hz]")
    t.add_argument("--temp-k", type=float, help="temperature [K] (config default 0.05)")
    t.add_argument("--plot-csv", help="write the fitted curve to this CSV")
    t.set_defaults(func=cmd_tls_fit)

    st = sub.add_parser("stats", help="per-group statistics of a device table")
    st.add_argument("table", nargs="?", help="device CSV (default: bundled table)")
    st.add_argument("--paper-groups", action="store_true",
                    help="4-5 GHz devices without airbridges")
    st.add_argument("--value", choices=("q_lp", "q_hp"), default="q_lp")
    st.add_argument("--f-min", type=float, help="minimum frequency [GHz]")
    st.add_argument("--f-max", type=float, help="maximum frequency [GHz]")
    st.add_argument("--require", action="append", default=[], choices=devices.FLAGS)
    st.add_argument("--exclude", action="append", default=[], choices=devices.FLAGS)
    st.add_argument("--group-prefix")
    st.add_argument("--ratio", nargs=2, action="append", metavar=("A", "B"),
                    help="report mean(B)/mean(A)")
    st.add_argument("--best", action="store_true", help="report the best device (unfiltered)")
    st.add_argument("--plot-csv", help="write per-device values to this CSV")
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg, out)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cpwlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoSolutionError as exc:
        print(f"cpwlab: no solution: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (FitFailure, UnphysicalParametersError) as exc:
        stage = getattr(exc, "stage", None) or "fit"
        print(f"cpwlab: fit failed at stage {stage}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (CpwlabError, OSError, ValueError) as exc:
        print(f"cpwlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
