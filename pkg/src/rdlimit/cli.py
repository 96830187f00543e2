"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 numerical or
convergence error.
"""
import argparse
import logging
import sys
import numpy as np

from . import io as rio
from .channel import (INPUT_STREAM, ChannelParams, apply_channel, mc_mutual_information,
                      per_sample_distortion, sample_variance_estimate, substream)
from .context import ContextModelSpec
from .correlation import overestimate_table
from .exceptions import (ConvergenceError, EstimationError, InternalConsistencyError,
                         InvalidArgumentError, NumericalError, PGMParseError)
from .gaussian_rd import UNIFORM_NOISE_VARIANCE, log_variance_grid, rate_gap_curve, rate_gaussian
from .pipeline import PipelineConfig, component_ablation, run_once, run_sweep
from .synthetic import SyntheticSourceSpec, generate_source
from .transforms import TransformSpec, fit_klt, psnr
from .waterfill import allocation_rates, reverse_water_fill

log = logging.getLogger("rdlimit")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
CONTEXT_NAMES = {"none": "none", "avg": "causal_average", "lsq": "causal_lsq"}
QUANTIZER_NAMES = {"test-channel": "test_channel", "uniform": "uniform"}


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rdlimit", description="Rate-distortion limit analysis for transform coding.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--output", required=True, help="CSV file to write")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gap-curve", help="uniform quantization vs R(D) per variance")
    common(p, seed=False)
    p.add_argument("--distortion", type=float, default=UNIFORM_NOISE_VARIANCE)
    p.add_argument("--variance-range", type=_floats, default=(1e-3, 1e6),
                   help="LOW,HIGH of the log-spaced variance grid")
    p.add_argument("--num", type=int, default=400)

    p = sub.add_parser("waterfill", help="reverse water-filling of given variances")
    common(p, seed=False)
    p.add_argument("--variances", type=_floats, required=True)
    p.add_argument("--budget", type=float, required=True, help="total distortion")

    p = sub.add_parser("channel-verify", help="Monte Carlo check of the scaled test channel")
    common(p)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--distortion", type=_floats, default=(0.25,),
                   help="comma-separated noise variances")
    p.add_argument("--samples", type=int, default=10**6)

    p = sub.add_parser("correlation", help="independence overestimate versus rho")
    common(p, seed=False)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--distortion", type=float, default=UNIFORM_NOISE_VARIANCE)
    p.add_argument("--rho", type=_floats, default=tuple(np.round(np.linspace(-1, 1, 41), 10)))

    p = sub.add_parser("rerun", help="replay the run recorded in a manifest")
    p.add_argument("manifest", help="*.manifest.json written by an earlier run")
    p.add_argument("--output", help="CSV to write (default: the recorded output path)")

    for name, helptext in (("rd-sweep", "R-D curve over a budget sweep"),
                           ("ablation", "uniform / test channel / context curves")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--input", nargs="+", default=[], metavar="PATH")
        p.add_argument("--synthetic", choices=("iid", "ar1"))
        p.add_argument("--ar-coeff", type=float, default=0.9)
        p.add_argument("--variance", type=float, default=1.0)
        p.add_argument("--size", type=_size, default=(128, 128))
        p.add_argument("--transform", choices=("identity", "dct", "klt"), default="dct")
        p.add_argument("--block-size", type=int, default=8)
        p.add_argument("--klt-basis", help="RDLB basis file to use instead of fitting")
        p.add_argument("--save-basis", help="write the fitted KLT basis here")
        p.add_argument("--context", choices=tuple(CONTEXT_NAMES), default="none")
        p.add_argument("--quantizer", choices=tuple(QUANTIZER_NAMES), default="test-channel")
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--budget", type=float)
        g.add_argument("--budget-sweep", type=_floats)
        p.add_argument("--variance-model", choices=("sample", "channel"), default="sample")
        p.add_argument("--reconstruction", choices=("channel", "mmse"), default="channel")
    return parser


def _images(args):
    if args.input and args.synthetic:
        raise UsageError("use either --input or --synthetic, not both")
    if args.input:
        return [rio.load_image(p) for p in args.input]
    if not args.synthetic:
        raise UsageError("one of --input or --synthetic is required")
    w, h = args.size
    kind = "iid_gaussian" if args.synthetic == "iid" else "ar1_field"
    spec = SyntheticSourceSpec(kind, w, h, args.variance,
                               args.ar_coeff if kind == "ar1_field" else 0.0, args.seed)
    return [generate_source(spec)]


def _pipeline_config(args, images):
    if args.klt_basis:
        if args.transform != "klt":
            raise UsageError("--klt-basis requires --transform klt")
        transform = rio.load_basis(args.klt_basis)
    elif args.transform == "klt":
        transform = fit_klt(images, args.block_size)
    else:
        transform = TransformSpec(args.transform, args.block_size)
    if args.save_basis:
        if transform.kind != "klt":
            raise UsageError("--save-basis requires --transform klt")
        rio.save_basis(args.save_basis, transform)
    sweep = tuple(sorted(set(args.budget_sweep or ())))
    return PipelineConfig(
        transform=transform,
        context=ContextModelSpec(CONTEXT_NAMES[args.context]),
        quantizer=QUANTIZER_NAMES[args.quantizer],
        budget=args.budget,
        budget_sweep=sweep,
        seed=args.seed,
        variance_model=args.variance_model,
        reconstruction=args.reconstruction,
    )


def _curve_rows(curve):
    return [(p.budget, p.latent_rate, p.rate, p.distortion_mse, p.psnr_db)
            for p in sorted(curve.points, key=lambda p: p.budget)]


def _single_points(images, config):
    runs = [run_once(im, config, config.budget) for im in images]
    d = float(np.mean([r.distortion_mse for r in runs]))
    return [(config.budget, float(np.mean([r.latent_rate for r in runs])),
             float(np.mean([r.rate for r in runs])), d, psnr(d))]


def cmd_gap_curve(args):
    lo, hi = args.variance_range
    pairs = rate_gap_curve(log_variance_grid(lo, hi, args.num), args.distortion)
    rows = [(p.variance, p.rate_uniform, p.rate_optimal, p.gap) for p in pairs]
    cfg = {"distortion": args.distortion, "variance_range": [lo, hi], "num": args.num}
    return rows, cfg, [], 0


def cmd_waterfill(args):
    alloc = reverse_water_fill(args.variances, args.budget)
    rates = allocation_rates(args.variances, alloc)
    rows = [(i, float(v), float(d), float(r), alloc.water_level)
            for i, (v, d, r) in enumerate(zip(args.variances, alloc.distortions, rates))]
    cfg = {"variances": list(args.variances), "budget": args.budget}
    return rows, cfg, [], 0


def cmd_channel_verify(args):
    rows = []
    for i, d in enumerate(args.distortion):
        seed = args.seed + i
        mi = mc_mutual_information(args.variance, d, args.samples, seed)
        params = ChannelParams(args.variance, d)
        x = np.sqrt(args.variance) * substream(seed, INPUT_STREAM).standard_normal(args.samples)
        real = apply_channel(x, params, seed)
        var = sample_variance_estimate(real.outputs)
        rows.append((args.variance, d, params.eta, mi.value, mi.stderr,
                     rate_gaussian(args.variance, d), var.value, var.stderr,
                     float(real.squared_errors.mean()), per_sample_distortion(params)))
    cfg = {"variance": args.variance, "distortion": list(args.distortion),
           "samples": args.samples}
    return rows, cfg, [], args.seed


def cmd_correlation(args):
    rows = overestimate_table(args.variance, args.distortion, args.rho)
    cfg = {"variance": args.variance, "distortion": args.distortion, "rho": list(args.rho)}
    return rows, cfg, [], 0


def cmd_rd_sweep(args):
    images = _images(args)
    config = _pipeline_config(args, images)
    if args.budget_sweep:
        rows = _curve_rows(run_sweep(images, config))
    else:
        rows = _single_points(images, config)
    return rows, config.to_dict(), args.input, args.seed


def cmd_ablation(args):
    images = _images(args)
    config = _pipeline_config(args, images)
    if len(config.budget_sweep) < 2:
        raise UsageError("ablation needs --budget-sweep with at least two budgets")
    curves = component_ablation(images, config)
    rows = [(name,) + row for name, curve in curves.items() for row in _curve_rows(curve)]
    return rows, config.to_dict(), args.input, args.seed


def _strip_output(argv):
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
        elif tok == "--output":
            skip = True
        elif not tok.startswith("--output="):
            out.append(tok)
    return out


def _rerun(args):
    doc = rio.read_manifest(args.manifest)
    for path, digest in zip(doc.get("input_paths", []), doc.get("input_sha256", [])):
        if rio.file_digest(path) != digest:
            raise UsageError(f"input {path} changed since the manifest was written")
    output = args.output or doc["output_path"]
    code = main(list(doc["argv"]) + ["--output", output])
    if code == EXIT_OK:
        replayed = rio.json.loads(rio.manifest_path(output).read_text(encoding="utf-8"))
        if replayed["config"] != doc["config"]:
            raise InternalConsistencyError("replayed run resolved a different config")
    return code


COMMANDS = {
    "gap-curve": cmd_gap_curve,
    "waterfill": cmd_waterfill,
    "channel-verify": cmd_channel_verify,
    "correlation": cmd_correlation,
    "rd-sweep": cmd_rd_sweep,
    "ablation": cmd_ablation,
}


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            return _rerun(args)
        rows, cfg, inputs, seed = COMMANDS[args.command](args)
        rio.write_csv(rows, args.output, args.command)
        rio.write_manifest(args.output, args.command, cfg, inputs, seed,
                           argv=_strip_output(argv))
    except (UsageError, InvalidArgumentError) as exc:
        print(f"rdlimit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PGMParseError, OSError) as exc:
        print(f"rdlimit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, NumericalError, EstimationError,
            InternalConsistencyError) as exc:
        print(f"rdlimit: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("wrote %d rows to %s", len(rows), args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
