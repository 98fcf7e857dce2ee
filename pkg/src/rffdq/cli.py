"""Command-line interface.

Every command is deterministic given its inputs and --seed: file outputs are
byte-identical across repeated invocations.  Exit codes: 0 success, 2 for
configuration/usage errors, 3 for numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys

import numpy as np

from . import bounds as bounds_mod
from . import harness
from .errors import CapacityError, ConfigError, DegenerateDistributionError, NonIntegerFrequencyError
from .freqcore import EncodingStrategy, build_frequency_set, load_encoding
from .freqsample import SeededRng, load_distribution
from .kernelmap import WeightVector, kernel_eval, load_function, rkhs_norm, weights_of
from .pqcsim import extract_trig_polynomial, load_circuit
from .regress import Dataset, kernel_ridge_fit, load_model, rff_fit, true_risk_estimate, empirical_risk, holdout_split


def _emit_json(doc, out_path):
    text = json.dumps(doc, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_points(path: str, d: int) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if any(c.strip().lstrip("-").replace(".", "", 1)[:1].isalpha() for c in cells):
                continue  # header line
            rows.append([float(c) for c in cells])
    if not rows:
        raise ConfigError(f"no points found in {path}")
    pts = np.asarray(rows, dtype=float)
    if pts.shape[1] != d:
        raise ConfigError(f"points in {path} have {pts.shape[1]} columns, expected {d}")
    return pts


def _load_weights(args) -> tuple[EncodingStrategy, WeightVector]:
    doc = _load_json(args.weights)
    if getattr(args, "encoding", None):
        enc = load_encoding(args.encoding)
    elif "encoding" in doc:
        enc = EncodingStrategy.from_json(doc["encoding"])
    else:
        raise ConfigError("no encoding given: pass --encoding or embed one in the weights file")
    return enc, WeightVector.from_json(doc)


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_freqset(args) -> int:
    enc = load_encoding(args.encoding)
    fs = build_frequency_set(enc, materialize=not args.lazy)
    if args.stats or not args.dump:
        stats = {
            "d": fs.d,
            "per_dimension_sizes": [int(f.size) for f in fs.per_dimension_freqs],
            "full_size": fs.full_size,
            "half_size": fs.size if fs.materialized else None,
            "is_integer": fs.is_integer,
            "materialized": fs.materialized,
        }
        _emit_json(stats, None)
    if args.dump:
        if not fs.materialized:
            raise CapacityError("cannot dump a lazy frequency set")
        half_keys = set(fs.index.keys())
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index"] + [f"omega_{j+1}" for j in range(fs.d)] + ["in_half"])
            for i, tup in enumerate(
                itertools.product(*[f.tolist() for f in fs.per_dimension_freqs])
            ):
                writer.writerow(
                    [i] + [repr(float(v)) for v in tup] + [1 if tup in half_keys else 0]
                )
    return 0


def cmd_kernel(args) -> int:
    enc, w = _load_weights(args)
    fs = build_frequency_set(enc)
    X = _load_points(args.x, fs.d)
    Xp = _load_points(args.xprime, fs.d)
    if X.shape[0] != Xp.shape[0]:
        raise ConfigError("--x and --xprime must have the same number of rows")
    values = [kernel_eval(X[i], Xp[i], fs, w) for i in range(X.shape[0])]
    _emit_json({"values": values}, args.out)
    return 0


def cmd_rkhs_norm(args) -> int:
    enc, w = _load_weights(args)
    fs = build_frequency_set(enc)
    f = load_function(args.function, fs)
    _emit_json({"rkhs_norm": rkhs_norm(f, w)}, args.out)
    return 0


def cmd_sample(args) -> int:
    enc = load_encoding(args.encoding)
    fs = build_frequency_set(enc, materialize=not args.lazy)
    dist = load_distribution(args.dist, fs)
    freqs = dist.sample(SeededRng(args.seed), args.M)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"omega_{j+1}" for j in range(fs.d)])
        for row in freqs:
            writer.writerow([repr(float(v)) for v in row])
    return 0


def cmd_fit(args) -> int:
    enc = load_encoding(args.encoding)
    fs = build_frequency_set(enc, materialize=not args.lazy)
    dist = load_distribution(args.dist, fs)
    data = Dataset.from_csv(args.data)
    lam = "auto" if args.lam == "auto" else float(args.lam)
    model = rff_fit(data, dist, args.M, lam, SeededRng(args.seed))
    _emit_json(model.to_json(), args.out)
    return 0


def cmd_oracle_krr(args) -> int:
    enc = load_encoding(args.encoding)
    fs = build_frequency_set(enc)
    if args.weights:
        _, w = _load_weights(args)
    elif args.dist:
        dist = load_distribution(args.dist, fs)
        w = weights_of(dist.pmf_vector())
    else:
        w = WeightVector.uniform(fs.size)
    data = Dataset.from_csv(args.data)
    lam = 1.0 / np.sqrt(data.n) if args.lam == "auto" else float(args.lam)
    model = kernel_ridge_fit(data, enc, fs, w, lam)
    _emit_json(model.to_json(), args.out)
    return 0


def cmd_risk(args) -> int:
    model = load_model(args.model)
    if args.problem:
        doc = _load_json(args.problem)
        spec = harness.ProblemSpec.from_json(doc)
        fs = build_frequency_set(spec.encoding)
        gen = SeededRng(spec.seed).generator()
        target = harness.realize_target(spec, fs, gen)
        est = true_risk_estimate(model, target, spec.noise_sigma**2)
        _emit_json(
            {"true_risk": est.value, "stderr": est.stderr, "method": est.method},
            args.out,
        )
    elif args.data:
        data = Dataset.from_csv(args.data)
        train, test = holdout_split(data, args.holdout_seed)
        _emit_json(
            {
                "holdout_risk": empirical_risk(model, test),
                "train_rows": train.n,
                "test_rows": test.n,
                "method": "holdout-80-20",
            },
            args.out,
        )
    else:
        raise ConfigError("risk needs --problem (known target) or --data (holdout)")
    return 0


def cmd_pqc_spectrum(args) -> int:
    circuit, obs = load_circuit(args.circuit)
    theta = []
    if args.theta:
        doc = _load_json(args.theta)
        theta = doc["theta"] if isinstance(doc, dict) else doc
    poly = extract_trig_polynomial(circuit, obs, np.asarray(theta, dtype=float), args.grid)
    _emit_json(poly.to_json(), args.out)
    return 0


def _function_and_dist(args):
    fs = None
    if args.encoding:
        enc = load_encoding(args.encoding)
        fs = build_frequency_set(enc)
    dist_doc = _load_json(args.dist)
    if fs is None:
        if dist_doc.get("kind") != "explicit":
            raise ConfigError(
                "distribution kinds other than 'explicit' need --encoding to fix the lattice"
            )
        support = np.atleast_2d(np.asarray(dist_doc["support"], dtype=float))
        fs = _lattice_from_points(support, args.function)
    from .freqsample import distribution_from_json

    dist = distribution_from_json(dist_doc, fs)
    f = load_function(args.function, fs) if args.function else None
    return f, dist


def _lattice_from_points(support: np.ndarray, function_path: str | None):
    """Minimal integer lattice covering an explicit support and a function's
    terms (used when no encoding document is supplied): per dimension j, the
    lattice {-k_j..k_j} realized by k_j spectra {-1/2, +1/2}."""
    pts = [support]
    if function_path:
        doc = _load_json(function_path)
        if doc["terms"]:
            pts.append(np.asarray([t["omega"] for t in doc["terms"]], dtype=float))
    allpts = np.vstack(pts)
    if np.max(np.abs(allpts - np.round(allpts))) > 1e-9:
        raise ConfigError("cannot infer a lattice from non-integer frequencies; pass --encoding")
    kmax = np.maximum(np.max(np.abs(allpts), axis=0).astype(int), 1)
    enc = EncodingStrategy.from_json(
        {"dimensions": [[[-0.5, 0.5]] * int(k) for k in kmax]}
    )
    return build_frequency_set(enc)


def cmd_bounds_sufficient(args) -> int:
    report = bounds_mod.sufficient_sample_counts(args.opnorm, args.C, args.b, args.eps, args.delta)
    _emit_json(report.to_json(), args.out)
    return 0


def cmd_bounds_lower(args) -> int:
    f, dist = _function_and_dist(args)
    if f is None:
        raise ConfigError("bounds lower needs --function")
    report = bounds_mod.required_sample_counts(f, dist, args.epshat)
    _emit_json(report.to_json(), args.out)
    return 0


def cmd_bounds_feasibility(args) -> int:
    f, dist = _function_and_dist(args)
    report = bounds_mod.feasibility_report(
        dist,
        f_hat=f,
        C=args.C,
        b=args.b,
        eps=args.eps,
        delta=args.delta,
        eps_hat=args.epshat,
    )
    if args.out:
        _emit_json(report.to_json(), args.out)
    else:
        sys.stdout.write(report.render_text() + "\n")
        _emit_json(report.to_json(), None)
    return 0


def cmd_experiment_run(args) -> int:
    config = harness.load_sweep_config(args.config)
    harness.run_sweep(config, args.out)
    return 0


def cmd_experiment_plot(args) -> int:
    rows = harness.read_rows(args.infile)
    harness.emit_plot(rows, args.kind, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rffdq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("freqset", help="construct and inspect a frequency lattice")
    p.add_argument("--encoding", required=True)
    p.add_argument("--stats", action="store_true")
    p.add_argument("--dump", default=None, metavar="CSV")
    p.add_argument("--lazy", action="store_true")
    p.set_defaults(func=cmd_freqset)

    p = sub.add_parser("kernel", help="evaluate the re-weighted kernel on point pairs")
    p.add_argument("--encoding", default=None)
    p.add_argument("--weights", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--xprime", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("rkhs-norm", help="hyperplane norm of a function under a weighting")
    p.add_argument("--function", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--encoding", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rkhs_norm)

    p = sub.add_parser("sample", help="draw frequencies from a distribution")
    p.add_argument("--encoding", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lazy", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="random-feature ridge fit")
    p.add_argument("--data", required=True)
    p.add_argument("--encoding", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--lazy", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oracle-krr", help="kernel ridge regression oracle")
    p.add_argument("--data", required=True)
    p.add_argument("--encoding", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--dist", default=None)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle_krr)

    p = sub.add_parser("risk", help="true risk (known target) or holdout risk (file data)")
    p.add_argument("--model", required=True)
    p.add_argument("--problem", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--holdout-seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("pqc-spectrum", help="extract a circuit model's spectrum")
    p.add_argument("--circuit", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pqc_spectrum)

    pb = sub.add_parser("bounds", help="sample-count calculators")
    bsub = pb.add_subparsers(dest="bounds_command", required=True)

    p = bsub.add_parser("sufficient", help="sufficient (n, M) calculator")
    p.add_argument("--opnorm", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds_sufficient)

    p = bsub.add_parser("lower", help="necessary M calculator")
    p.add_argument("--function", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--epshat", type=float, required=True)
    p.add_argument("--encoding", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds_lower)

    p = bsub.add_parser("feasibility", help="combined feasibility verdict")
    p.add_argument("--dist", required=True)
    p.add_argument("--function", default=None)
    p.add_argument("--encoding", default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--epshat", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds_feasibility)

    pe = sub.add_parser("experiment", help="sweeps and plots")
    esub = pe.add_subparsers(dest="experiment_command", required=True)

    p = esub.add_parser("run", help="run a sweep config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment_run)

    p = esub.add_parser("plot", help="render an SVG from a results table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (
        CapacityError,
        NonIntegerFrequencyError,
        DegenerateDistributionError,
        np.linalg.LinAlgError,
        FloatingPointError,
        ValueError,
    ) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
