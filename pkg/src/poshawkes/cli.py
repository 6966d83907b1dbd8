"""Command-line entry point: ``poshawkes {fit,predict,evaluate,synth,simulate}``.

Exit codes: 0 success, 1 numeric or model failure, 2 I/O or configuration
failure.
"""

import argparse
import csv
import io
import logging
import math
import os
import sys
import traceback
import warnings

import numpy as np

from .config import ConfigError, load_config

log = logging.getLogger("poshawkes")

EXIT_OK, EXIT_MODEL, EXIT_IO = 0, 1, 2
MAX_SIM_CASCADE = 20000


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--kernel-mode", dest="kernel_mode", choices=("paper", "continuous"))
    common.add_argument("--model", choices=("hawkes", "nhpp", "regression"))
    common.add_argument("--events")
    common.add_argument("--calendar")
    common.add_argument("--model-in", dest="model_in")
    common.add_argument("--model-out", dest="model_out")
    common.add_argument("--output", "-o")
    common.add_argument("--svg")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="poshawkes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="fit a model and write the model file")
    sp = sub.add_parser("predict", parents=[common], help="hourly forecast from a model file")
    sp.add_argument("--horizon-hours", dest="horizon_hours", type=float)
    sp.add_argument("--n-realizations", dest="n_realizations", type=int)
    sub.add_parser("evaluate", parents=[common], help="rolling-origin cross-validation")
    sp = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.add_argument("--days", dest="synth_days", type=int)
    sp = sub.add_parser("simulate", parents=[common], help="sample events forward from a model file")
    sp.add_argument("--horizon-hours", dest="horizon_hours", type=float)
    return p


def _config(args):
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    for key in ("seed", "kernel_mode", "model", "events", "calendar", "model_in", "model_out", "output", "svg",
                "horizon_hours", "n_realizations", "out_dir", "synth_days"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    return load_config(args.config, overrides)


def _require(path, what):
    if not path:
        raise ConfigError(f"no {what} file given")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} file not found: {path}")
    return path


def _load_data(cfg):
    from .covariates import read_calendar
    from .events import build_cascades, read_events

    cal = read_calendar(_require(cfg.calendar, "calendar"), cfg.timezone, cfg.epoch)
    events = read_events(_require(cfg.events, "events"), cfg.epoch, cfg.timezone)
    ds = build_cascades(events)
    if math.isnan(cfg.t_a) and math.isnan(cfg.t_b):
        return ds, cal
    t_a = ds.t_a if math.isnan(cfg.t_a) else cfg.t_a
    t_b = float(np.nextafter(ds.t_b, np.inf)) if math.isnan(cfg.t_b) else cfg.t_b
    # events after t_b are unseen; retweets after t_b are cut from their cascades
    return ds.window(t_a, t_b), cal


def _write(path, text):
    if path and path != "-":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_fit(cfg):
    from .background import FitOptions, fit_beta, identifiable
    from .baselines import fit_nhpp, fit_retweet_regression
    from .events import empirical_distributions
    from .influence_fit import InfluenceOptions
    from .intensity import fit_hawkes
    from .modelfile import dataset_fingerprint, save
    from .simulate import check_subcritical

    ds, cal = _load_data(cfg)
    opts = FitOptions(cfg.ridge, cfg.tol, cfg.max_iter)
    if cfg.model == "hawkes":
        iopts = InfluenceOptions(cfg.influence_max_iter, cfg.influence_rel_tol, seed=cfg.seed)
        model = fit_hawkes(ds, cal, cfg.kernel_mode, cfg.window_s, opts, iopts, cfg.phat_contributors)
        check_subcritical(model)
        beta = model.background.beta
        inf = model.influence
        print(f"influence: r0={inf.r0:.6g} phi0={inf.phi0:.6g} s tau_m={inf.tau_m:.6g} s "
              f"loss={inf.loss:.6g} cascades={len(inf.p0_by_origin)}")
        for w in inf.meta.get("warnings", []):
            print(f"warning: {w}", file=sys.stderr)
    elif cfg.model == "nhpp":
        model = fit_nhpp(ds, cal, opts)
        beta = model.gamma
    else:
        bg = fit_beta(ds, cal, opts)
        model = (bg, fit_retweet_regression(ds, cfg.early_window_s), empirical_distributions(ds))
        beta = bg.beta
    meta = {"seed": cfg.seed, "t_a": repr(ds.t_a), "t_b": repr(ds.t_b), "n_events": ds.n_events,
            "future_integral": cfg.future_integral, "phat_contributors": cfg.phat_contributors}
    save(cfg.model_out, model, dataset_fingerprint(ds), meta)
    print(f"{'covariate weight':<16} {'value':>12}")
    for k, v in identifiable(beta).items():
        print(f"{k:<16} {v:12.5f}")
    print(f"model written to {cfg.model_out}")
    if cfg.svg:
        from .plots import weights_svg

        weights_svg(beta, cfg.svg)
    return EXIT_OK


def _horizon(cfg, t_b):
    start = t_b if math.isnan(cfg.horizon_start) else cfg.horizon_start
    if start < t_b - 1e-6:
        raise ConfigError(f"horizon start {start} precedes the model's training end t_b={t_b}")
    return start, start + cfg.horizon_hours * 3600.0


def _predict_series(cfg, model, info, cal, ds_all):
    """Returns ``(hour_starts, predicted, realizations)`` over the configured horizon."""
    from .baselines import predict_nhpp, predict_regression_baseline
    from .simulate import forecast, hour_edges

    kind = info["kind"]
    t_b = model.t_b if kind == "hawkes" else float(info["meta"]["t_b"])
    start, end = _horizon(cfg, t_b)
    if kind == "hawkes":
        if ds_all is None:
            raise ConfigError("hawkes predictions need the training events (--events)")
        history = ds_all.window(model.t_a, model.t_b)
        fc = forecast(model, history, cal, (t_b, end), cfg.n_realizations, cfg.seed, cfg.future_integral)
        keep = fc.hour_starts >= start - 1e-6
        return fc.hour_starts[keep], fc.predicted[keep], fc.realizations[:, keep]
    edges = hour_edges(start, end)
    if kind == "nhpp":
        pred = predict_nhpp(model, cal, (start, end))
    else:
        bg, reg, dists = model
        pred = predict_regression_baseline(bg, reg, dists, cal, (start, end), cfg.seed)
    return edges[:-1], pred, np.zeros((0, pred.shape[0]))


def cmd_predict(cfg):
    from .covariates import read_calendar
    from .evaluate import bin_hourly
    from .events import build_cascades, read_events
    from .modelfile import load

    model, info = load(_require(cfg.model_in, "model"))
    cal = read_calendar(_require(cfg.calendar, "calendar"), cfg.timezone, cfg.epoch)
    ds_all = None
    if cfg.events:
        ds_all = build_cascades(read_events(_require(cfg.events, "events"), cfg.epoch, cfg.timezone))
    hours, pred, real = _predict_series(cfg, model, info, cal, ds_all)

    observed = None
    if ds_all is not None and hours.size and ds_all.t_b >= hours[-1] + 3600.0 - 1e-6:
        _, observed = bin_hourly(ds_all.event_times, (hours[0], hours[-1] + 3600.0))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hour_start", "predicted_mean", "observed"] + [f"realization_{k + 1}" for k in range(real.shape[0])])
    for h in range(hours.shape[0]):
        obs = "" if observed is None else int(observed[h])
        w.writerow([cal.local(hours[h]).isoformat(), repr(float(pred[h])), obs] + [int(x) for x in real[:, h]])
    _write(cfg.output, buf.getvalue())
    if cfg.svg and hours.size:
        from .plots import forecast_svg

        forecast_svg(cal, hours, pred, observed, cfg.svg)
    return EXIT_OK


def cmd_evaluate(cfg, explicit_model):
    from .evaluate import CVConfig, folds_csv, run_cv, summary_table

    ds, cal = _load_data(cfg)
    cv = CVConfig(cfg.train_days, cfg.block_days, cfg.eval_days, cfg.kernel_mode, cfg.window_s, cfg.ridge, cfg.tol,
                  cfg.max_iter, cfg.influence_max_iter, cfg.influence_rel_tol, cfg.n_realizations,
                  cfg.future_integral, cfg.phat_contributors, cfg.early_window_s)
    kinds = [explicit_model] if explicit_model else cfg.model_list
    results = [run_cv(ds, cal, k, cv, cfg.seed) for k in kinds]
    text = folds_csv(results, cal)
    if cfg.output:
        _write(cfg.output, text)
    else:
        sys.stdout.write(text + "\n")
    print(summary_table(results))
    if cfg.svg:
        from .plots import folds_svg

        folds_svg(results, cfg.svg)
    failed = sum(r.n_failed for r in results)
    return EXIT_MODEL if failed == sum(len(r.folds) for r in results) else EXIT_OK


def cmd_synth(cfg):
    from dataclasses import replace

    from .covariates import format_calendar
    from .events import format_events
    from .simulate import SyntheticTruth, default_calendar, generate_synthetic

    truth = replace(SyntheticTruth(), mode=cfg.kernel_mode, p0_median=cfg.synth_p0_median)
    cal = default_calendar(cfg.synth_days, cfg.epoch, cfg.timezone)
    window = (0.0, cfg.synth_days * 86400.0)
    ds = generate_synthetic(truth, cal, window, cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    events = [m for c in ds.cascades for m in c.members]
    events.sort(key=lambda e: (e.time_s, e.event_id))
    _write(os.path.join(cfg.out_dir, "events.csv"), format_events(events, cfg.epoch, cfg.timezone))
    first = cal.local(window[0]).date()
    last = cal.local(window[1] - 1.0).date()
    _write(os.path.join(cfg.out_dir, "calendar.csv"), format_calendar(cal, first, last))
    lines = [f"seed = {cfg.seed}", f"t_a = {window[0]!r}", f"t_b = {window[1]!r}",
             f"epoch = {cfg.epoch}", f"timezone = {cfg.timezone}"]
    for k, v in truth.to_dict().items():
        v = ",".join(repr(float(x)) for x in v) if isinstance(v, tuple) else (repr(v) if isinstance(v, float) else v)
        lines.append(f"{k} = {v}")
    _write(os.path.join(cfg.out_dir, "truth.txt"), "\n".join(lines) + "\n")
    print(f"wrote {ds.n_events} events ({len(ds.cascades)} originals) to {cfg.out_dir}")
    return EXIT_OK


def cmd_simulate(cfg):
    from . import kernels
    from .covariates import read_calendar
    from .events import TweetEvent, format_events
    from .modelfile import load
    from .errors import RunawayCascadeError
    from .simulate import derive_seeds, sample_background_times, sample_originals

    model, info = load(_require(cfg.model_in, "model"))
    cal = read_calendar(_require(cfg.calendar, "calendar"), cfg.timezone, cfg.epoch)
    kind = info["kind"]
    t_b = model.t_b if kind == "hawkes" else float(info["meta"]["t_b"])
    start, end = _horizon(cfg, t_b)
    events = []
    if kind == "hawkes":
        s_orig, s_casc = derive_seeds(cfg.seed, 2)
        rng = np.random.default_rng(s_casc)
        pool = np.asarray(model.dists.follower_samples, dtype=np.float64)
        inf = model.influence
        for k, o in enumerate(sample_originals(model, cal, (start, end), s_orig)):
            oid = f"s{k:06d}"
            events.append(TweetEvent(oid, None, o.t0, o.followers, o.S))
            if o.p0 <= 0:
                continue
            try:
                rt_t, rt_d = kernels.core.simulate_cascade(o.t0, float(o.followers), o.p0, o.S, inf.r0, inf.phi0,
                                                           inf.tau_m, inf.period, model.tail, end, pool, rng,
                                                           MAX_SIM_CASCADE)
            except OverflowError as exc:
                # single draws from the fitted p0 multiset can be supercritical even when the mean is not
                raise RunawayCascadeError(f"{exc} (origin p0={o.p0:.3g}, followers={o.followers})") from None
            events += [TweetEvent(f"{oid}r{m:05d}", oid, float(t), int(d), None) for m, (t, d) in enumerate(zip(rt_t, rt_d))]
    else:
        from .background import BackgroundModel

        coef = model.gamma if kind == "nhpp" else model[0].beta
        times = sample_background_times(BackgroundModel(coef, 0.0), cal, (start, end), cfg.seed)
        events = [TweetEvent(f"s{k:06d}", None, float(t), 0, 3) for k, t in enumerate(times)]
    events.sort(key=lambda e: (e.time_s, e.event_id))
    _write(cfg.output, format_events(events, cfg.epoch, cfg.timezone))
    return EXIT_OK


def _provenance(exc):
    tb = exc.__traceback__
    name = "poshawkes"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("poshawkes.") and mod != "poshawkes.cli":
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None):
    from .errors import DataError, PosHawkesError

    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = _config(args)
        sys.stderr.write("# effective config\n" + "".join(f"#   {line}\n" for line in cfg.dumps().splitlines()))
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.model)
        if args.command == "synth":
            return cmd_synth(cfg)
        return cmd_simulate(cfg)
    except (ConfigError, DataError, OSError) as exc:
        print(f"error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PosHawkesError, ArithmeticError, ValueError) as exc:
        print(f"error [{_provenance(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
