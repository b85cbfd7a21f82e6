"""``gp`` command-line tool.

Subcommands: ``regress``, ``classify``, ``lvm``, ``kernel-eval``.
Exit codes: 0 success, 2 input error (bad CSV, bad kernel spec, bad
flags), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import gpc, gplvm, gpr
from . import kernels as kern
from .data import fmt, input_header, read_csv, split_target, write_csv
from .errors import InputError, NumericalError, ParseError
from .svg import classification_figure, regression_figure, scatter_figure

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _grid(text):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be MIN:MAX:N, got {text!r}") from None
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    return lo, hi, count


def _kernel(text):
    try:
        return kern.parse_kernel_spec(text)
    except ParseError as exc:
        raise InputError(f"bad kernel spec: {exc}\n{exc.caret()}") from exc


def _test_inputs(args, x_train):
    if args.test:
        ds = read_csv(args.test)
        xt = ds.values
        if xt.shape[1] != x_train.shape[1]:
            raise InputError(f"--test file has {xt.shape[1]} columns, training inputs have {x_train.shape[1]}")
        return xt
    if args.grid:
        lo, hi, count = args.grid
        if x_train.shape[1] != 1:
            raise InputError("--grid needs 1-D inputs; use --test for multi-dimensional data")
        return np.linspace(lo, hi, count)[:, None]
    if x_train.shape[1] == 1:
        return np.linspace(x_train.min(), x_train.max(), 200)[:, None]
    return x_train


def _emit(args, header, columns):
    if args.out:
        write_csv(args.out, header, columns)
    else:
        write_csv(sys.stdout, header, columns)


def _theta_line(kernel, **extra):
    parts = [f"{key}={fmt(v)}" for key, v in kern.named_params(kernel)]
    parts += [f"{key}={fmt(v)}" for key, v in extra.items()]
    return " ".join(parts)


def _info(args, line):
    # with no --out the CSV goes to stdout, so the summary moves to stderr
    print(line, file=sys.stdout if args.out else sys.stderr)


def run_regress(args):
    x, y = split_target(read_csv(args.data), "y")
    kernel = _kernel(args.kernel)
    if args.optimize:
        kernel, _ = gpr.optimize_hyperparams(x, y, kernel)
    model = gpr.fit(x, y, kernel)
    xt = _test_inputs(args, x)
    pred = gpr.predict(model, xt)
    lo, hi = pred.band(args.band)
    _emit(args, input_header("x_star", xt.shape[1]) + ["mean", "variance", "lo", "hi"],
          [*xt.T, pred.mean, pred.variance, lo, hi])
    _info(args, _theta_line(kernel, log_ml=gpr.log_marginal_likelihood(model)))
    if args.svg:
        if xt.shape[1] != 1:
            raise InputError("--svg needs 1-D inputs")
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(regression_figure(x[:, 0], y, xt[:, 0], pred.mean, lo, hi))
    return 0


def _classify_labels(raw):
    uniq = np.unique(raw)
    if np.any(raw < 0):
        if not set(uniq.tolist()) <= {-1.0, 1.0}:
            raise InputError(f"binary labels must be -1 or 1, found {uniq.tolist()}")
        return "binary"
    if not np.all(raw == np.round(raw)):
        raise InputError("class labels must be integers 0..C-1 (or -1/1 for binary)")
    return "multi"


def run_classify(args):
    x, raw = split_target(read_csv(args.data), "label")
    kernel = _kernel(args.kernel)
    mode = _classify_labels(raw)
    xt = _test_inputs(args, x)
    header = input_header("x_star", xt.shape[1])
    if mode == "binary":
        model = gpc.fit_binary(x, raw, kernel, optimize=args.optimize)
        prob = gpc.predict_prob(model, xt)
        _emit(args, header + ["prob"], [*xt.T, prob])
        _info(args, _theta_line(model.kernel, log_ml=gpc.log_marginal_binary(model)))
        marks, series = (raw > 0).astype(int), prob
    else:
        model = gpc.fit_multi(x, raw, kernel, optimize=args.optimize)
        probs = gpc.predict_multi(model, xt)
        _emit(args, header + [f"prob_{c}" for c in range(model.n_classes)], [*xt.T, *probs.T])
        _info(args, _theta_line(model.kernels[0], log_ml=gpc.log_marginal_multi(model)))
        marks, series = raw.astype(int), probs
    if args.svg:
        if xt.shape[1] != 1:
            raise InputError("--svg needs 1-D inputs")
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(classification_figure(x[:, 0], marks, xt[:, 0], series))
    return 0


def run_lvm(args):
    ds = read_csv(args.data)
    labels = None
    if ds.has("label"):
        labels = ds.column("label")
        ds = ds.drop("label")
    y = ds.values
    if args.q >= y.shape[1]:
        raise InputError(f"latent dimension q={args.q} must be smaller than the data dimension d={y.shape[1]}")
    config = gplvm.LvmConfig(q=args.q, max_iters=args.max_iters, seed=args.seed)
    model = gplvm.fit_lvm(y, config)
    header = [f"x{j + 1}" for j in range(args.q)]
    cols = list(model.x_latent.T)
    if labels is not None:
        header.append("label")
        cols.append(labels)
    _emit(args, header, cols)
    t = model.theta
    _info(args, " ".join([
        f"sigma={fmt(t.sigma)}", f"length={fmt(t.length)}", f"beta={fmt(t.beta)}",
        f"log_lik={fmt(model.history[-1])}", f"init_log_lik={fmt(model.history[0])}",
        f"steps={model.iterations}", f"converged={str(model.converged).lower()}",
    ]))
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(scatter_figure(model.x_latent, labels))
    return 0


def _matrix_text(m):
    return "\n".join("  ".join(f"{v:6.2f}" for v in row) for row in np.atleast_2d(m))


def run_kernel_eval(args):
    kernel = _kernel(args.kernel)
    ds = read_csv(args.data)
    x = ds.drop("y").values if ds.has("y") and ds.values.shape[1] > 1 else ds.values
    lines = ["K =", _matrix_text(kern.gram(kernel, x))]
    if args.x_star is not None:
        xs = np.array([float(v) for v in args.x_star.split(",")])
        xs = xs.reshape(-1, x.shape[1]) if x.shape[1] > 1 else xs[:, None]
        lines += ["K* =", _matrix_text(kern.cross(kernel, x, xs))]
        kss = kern.cross(kernel, xs, xs)
        kss[np.diag_indices_from(kss)] += kernel.noise_variance
        lines += ["K** =", _matrix_text(kss)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="gp", description="Gaussian-process regression, classification and GP-LVM.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, kernel_required=True):
        sp.add_argument("--data", required=True, help="input CSV with header")
        sp.add_argument("--kernel", required=kernel_required, help='kernel spec, e.g. "se(sf=1,l=1)+noise(sn=0.3!)"')
        sp.add_argument("--out", help="output file (default: standard output)")
        sp.add_argument("--seed", type=int, default=0)

    for name, helptext in (("regress", "GP regression with confidence band"), ("classify", "Laplace GP classification")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--optimize", action="store_true", help="fit free kernel parameters by maximizing the marginal likelihood")
        grid = sp.add_mutually_exclusive_group()
        grid.add_argument("--grid", type=_grid, help="test grid MIN:MAX:N (write --grid=-1.7:0.4:1000 for negative MIN)")
        grid.add_argument("--test", help="CSV of test inputs")
        sp.add_argument("--svg", help="write an SVG figure here")
        if name == "regress":
            sp.add_argument("--band", type=float, default=1.96, help="band half-width in standard deviations")

    sp = sub.add_parser("lvm", help="GP latent variable model")
    common(sp, kernel_required=False)
    sp.add_argument("--q", type=int, default=1, help="latent dimension")
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--svg", help="write an SVG scatter here")

    sp = sub.add_parser("kernel-eval", help="print K, K* and K** for inspection")
    common(sp)
    sp.add_argument("--x-star", help="comma-separated test input(s)")
    return p


COMMANDS = {"regress": run_regress, "classify": run_classify, "lvm": run_lvm, "kernel-eval": run_kernel_eval}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"gp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"gp {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as exc:
        print(f"gp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
