"""Command-line entry point: ``unsupcal {synth,fit,apply,evaluate,surface}``.

Stages communicate only through files. Exit status is 0 when every output
was written and no fit was flagged degenerate, 1 on runtime failures and 2
on bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import dcf, em, laplace, predictive, surface, synth
from .model import FitError, GmmParams, fit_supervised, plugin_llr, to_affine
from .scores import (NONTARGET_TAG, TARGET_TAG, LabeledScoreSet, ScoreFormatError,
                     format_float, load_scores, summary_stats, write_scores)

log = logging.getLogger("unsupcal")


class CliError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _prior(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _prior_list(text):
    return [_prior(t) for t in text.split(",") if t.strip()]


def _em_config(args) -> em.EmConfig:
    return em.EmConfig(max_iter=args.max_iter, tol=args.tol, restarts=args.restarts)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    truth = GmmParams.make(args.mu1, args.mu2, args.sigma ** 2, args.pi1)
    data = synth.generate(synth.SynthSpec(truth, args.n, args.seed))
    write_scores(args.out, data, "csv")
    frac = float(np.mean(data.labels))
    print(f"T={data.T} target_fraction={frac:.6g}")
    if data.targets.size:
        print(f"target_mean={np.mean(data.targets):.6g}")
    if data.nontargets.size:
        print(f"nontarget_mean={np.mean(data.nontargets):.6g}")
    return 0


def cmd_fit(args) -> int:
    data = load_scores(args.input)
    out = {"mode": args.mode}
    status = 0
    if args.mode == "supervised":
        if not isinstance(data, LabeledScoreSet):
            raise CliError("supervised fitting needs a labeled csv file")
        params = fit_supervised(data)
    else:
        trace = em.fit_unsupervised(data, _em_config(args))
        params = trace.params
        out["trace"] = trace.to_dict()
        if not trace.converged:
            log.warning("EM stopped at max_iter without converging")
            status = 1
    out["params"] = params.to_dict()
    out["affine"] = to_affine(params.cal).to_dict()
    if args.laplace:
        if args.mode != "unsupervised":
            raise CliError("--laplace applies to unsupervised fits")
        post = laplace.laplace_fit(data, trace)
        post3 = laplace.marginalize_pi1(post)
        out["posterior"] = post.to_dict()
        out["posterior_cal"] = post3.to_dict()
        out["error_bars"] = laplace.error_bars(post).to_dict()
        out["dominance"] = laplace.dominance_report(trace, post)
    _write_json(args.out, out)
    s = summary_stats(data)
    print(f"T={len(data)} mean={s['mean']:.6g} variance={s['variance']:.6g}")
    print(json.dumps(out["params"]))
    return status


def cmd_apply(args) -> int:
    model = _read_json(args.model)
    params = GmmParams.from_dict(model["params"])
    data = load_scores(args.input)
    x = data.scores
    cols = {"score": x, "log_lr_plugin": plugin_llr(x, params.cal)}
    if args.mode == "predictive":
        if "posterior_cal" in model:
            post = laplace.GaussianPosterior.from_dict(model["posterior_cal"])
        elif "posterior" in model:
            post = laplace.marginalize_pi1(laplace.GaussianPosterior.from_dict(model["posterior"]))
        else:
            raise CliError("predictive mode needs a model file fitted with --laplace")
        q = predictive.QuadratureSpec(args.quadrature, nodes=args.nodes,
                                      samples=args.samples, seed=args.seed)
        cols["log_lr_predictive"] = predictive.predictive_log_lr(x, post, q)
    if isinstance(data, LabeledScoreSet):
        cols["label"] = np.where(data.labels, TARGET_TAG, NONTARGET_TAG)
    names = list(cols)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(names)
        for row in zip(*(cols[n] for n in names)):
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    return 0


def read_llr_csv(path, column=None):
    """Read (llrs, labels) from a csv with a ``label`` column.

    Without ``column`` the first of log_lr_predictive, log_lr_plugin, llr,
    score that is present is used.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        if "label" not in fields:
            raise CliError(f"{path}: a 'label' column is required")
        if column is None:
            for c in ("log_lr_predictive", "log_lr_plugin", "llr", "score"):
                if c in fields:
                    column = c
                    break
            else:
                raise CliError(f"{path}: no llr column found")
        elif column not in fields:
            raise CliError(f"{path}: no column {column!r}")
        llrs, labels = [], []
        for row in reader:
            tag = row["label"].strip()
            if tag not in (TARGET_TAG, NONTARGET_TAG):
                raise ScoreFormatError(f"bad label {tag!r}", reader.line_num)
            llrs.append(float(row[column]))
            labels.append(tag == TARGET_TAG)
    return np.array(llrs), np.array(labels, dtype=bool)


def cmd_evaluate(args) -> int:
    llrs, labels = read_llr_csv(args.input, args.llr_column)
    report = dcf.dcf_report(llrs, labels, args.points)
    report.to_csv(args.out)
    print(f"targets={report.n_targets} nontargets={report.n_nontargets} "
          f"eer={dcf.empirical_eer(llrs, labels):.6g}")
    for r in report.rows:
        print(f"pi1'={r.pi1_prime:g} normDCF={r.norm_dcf:.4f} minDCF={r.min_dcf:.4f}")
    return 0


def cmd_surface(args) -> int:
    data = load_scores(args.input)
    d_axis = np.linspace(args.d_min, args.d_max, args.d_steps)
    l_axis = np.linspace(args.logit_min, args.logit_max, args.logit_steps)
    g = surface.explore(data, d_axis, l_axis, _em_config(args), n_jobs=args.jobs)
    g.to_csv(args.out)
    report = surface.peak_report(g)
    if args.peak:
        _write_json(args.peak, report)
    print(json.dumps(report))
    return 0 if g.complete else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="unsupcal",
        description="Unsupervised score calibration with a two-component Gaussian mixture.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def em_flags(sp):
        sp.add_argument("--max-iter", type=_positive_int, default=500)
        sp.add_argument("--tol", type=float, default=1e-9,
                        help="per-score log-likelihood improvement that stops EM")
        sp.add_argument("--restarts", type=_positive_int, default=4)

    sp = sub.add_parser("synth", help="generate labeled synthetic scores")
    sp.add_argument("--mu1", type=float, required=True, help="target mean")
    sp.add_argument("--mu2", type=float, required=True, help="non-target mean")
    sp.add_argument("--sigma", type=float, required=True, help="within-class standard deviation")
    sp.add_argument("--pi1", type=float, required=True, help="target proportion")
    sp.add_argument("--n", type=_positive_int, required=True, help="number of trials")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output csv (score,label)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("fit", help="fit calibration parameters")
    sp.add_argument("--mode", choices=("supervised", "unsupervised"), default="unsupervised")
    sp.add_argument("--in", dest="input", required=True, help="score file (plain or csv)")
    sp.add_argument("--out", required=True, help="output model json")
    sp.add_argument("--laplace", action="store_true",
                    help="also write the Laplace posterior and error-bars")
    em_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("apply", help="map scores to log-likelihood-ratios")
    sp.add_argument("--model", required=True, help="model json written by 'fit'")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True, help="output csv")
    sp.add_argument("--mode", choices=("plugin", "predictive"), default="plugin")
    sp.add_argument("--quadrature", choices=("gauss-hermite", "monte-carlo"),
                    default="gauss-hermite")
    sp.add_argument("--nodes", type=int, default=9, help="Gauss-Hermite nodes per dimension")
    sp.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo sample count")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("evaluate", help="normalized and minimum DCF")
    sp.add_argument("--in", dest="input", required=True,
                    help="csv with an llr column and a label column")
    sp.add_argument("--out", required=True, help="output csv, one row per operating point")
    sp.add_argument("--points", type=_prior_list, default=list(dcf.DEFAULT_OPERATING_POINTS),
                    help="comma-separated target priors (default 0.001,0.01,0.1,0.5)")
    sp.add_argument("--llr-column", default=None)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("surface", help="profile likelihood over (d', logit pi1)")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True, help="grid csv")
    sp.add_argument("--peak", default=None, help="peak report json")
    sp.add_argument("--d-min", type=float, default=0.0)
    sp.add_argument("--d-max", type=float, default=8.0)
    sp.add_argument("--d-steps", type=_positive_int, default=33)
    sp.add_argument("--logit-min", type=float, default=-14.0)
    sp.add_argument("--logit-max", type=float, default=2.0)
    sp.add_argument("--logit-steps", type=_positive_int, default=33)
    sp.add_argument("--jobs", type=_positive_int, default=1)
    em_flags(sp)
    sp.set_defaults(func=cmd_surface)
    return p


def _check_distinct_paths(parser, args):
    reads = [getattr(args, k, None) for k in ("input", "model")]
    writes = [getattr(args, k, None) for k in ("out", "peak")]
    reads = {os.path.realpath(p) for p in reads if p}
    for p in writes:
        if p and os.path.realpath(p) in reads:
            parser.error(f"output {p} would overwrite an input file")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_distinct_paths(parser, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, FitError, ScoreFormatError, ValueError, OSError) as e:
        print(f"unsupcal {args.command}: error: {e}", file=sys.stderr)
        return 1
    except KeyError as e:
        print(f"unsupcal {args.command}: error: missing field {e} in model file",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
