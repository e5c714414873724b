"""Command-line frontend. Every run writes one JSON report.

    nldreg synth --kind completion --out DIR
    nldreg complete --data DIR/observed.csv --mask DIR/mask.csv --gt DIR/truth.csv
    nldreg tnh --data DIR/observed.csv --mask DIR/mask.csv --gt DIR/truth.csv
    nldreg nrsfm --data scene.mocap
    nldreg kpca --data train.csv --test test.csv --gt clean.csv

Exit status is 0 on success, 2 for usage errors and the error category's
code otherwise (the report then carries ``status: error`` and the category).
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, io, synth
from .cfsolver import ShrinkageParams, robust_kpca
from .errors import InvalidInputError, NLDRError
from .kernelcore import KernelModel, kernel_matrix, select_width
from .metrics import completion_rms, e3d, knn_classify, manifold_error
from .pipeline import PenaltySchedule, nrsfm_solve, regularized_solve
from .preimage import LMConfig
from .problems import CompletionLoss, MaskedObservations, tnh_solve

log = logging.getLogger(__name__)


def _width(value):
    if value in ("dmax", "dmed"):
        return value
    try:
        g = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("width must be dmax, dmed or a positive number") from None
    if not g > 0:
        raise argparse.ArgumentTypeError("width must be positive")
    return g


def _add_solver_flags(p, tau, max_inner, lm_iters):
    p.add_argument("--tau", type=float, default=tau)
    p.add_argument("--rho0", type=float, default=None, help="first penalty (default: 1 for "
                   "completion, 100 tau for nrsfm)")
    p.add_argument("--rho-max", type=float, default=None, help="last penalty (default: 1e4 rho0)")
    p.add_argument("--rho-scale", type=float, default=10.0)
    p.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    p.add_argument("--width", type=_width, default="dmed",
                   help="dmax, dmed or an explicit RBF gamma")
    p.add_argument("--max-outer", type=int, default=None,
                   help="cap on penalty stages (complete) or camera rounds (nrsfm)")
    p.add_argument("--max-inner", type=int, default=max_inner)
    p.add_argument("--inner-tol", type=float, default=1e-6)
    p.add_argument("--lm-iters", type=int, default=lm_iters)


def build_parser():
    parser = argparse.ArgumentParser(prog="nldreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (a directory for synth)")
        p.add_argument("--report", help="JSON report path (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("synth", help="write a synthetic instance")
    common(p)
    p.add_argument("--kind", choices=["completion", "manifold", "nrsfm"], default="completion")
    p.add_argument("--n", type=int, default=100, help="samples (per class for manifold)")
    p.add_argument("--dim", type=int, default=12)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--missing-prob", type=float, default=0.25)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--points", type=int, default=30)
    p.add_argument("--amplitude", type=float, default=0.35)

    p = sub.add_parser("complete", help="kernel-regularized matrix completion")
    common(p)
    _add_solver_flags(p, tau=1.0, max_inner=100, lm_iters=2)
    p.add_argument("--data", required=True, help="observed matrix CSV (NaN marks missing)")
    p.add_argument("--mask", help="0/1 mask CSV, 1 = observed")
    p.add_argument("--gt", help="complete ground-truth matrix CSV")

    p = sub.add_parser("tnh", help="linear trace-norm baseline")
    common(p)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=20000)
    p.add_argument("--data", required=True, help="matrix CSV, or a .mocap file for NRSfM")
    p.add_argument("--mask", help="0/1 mask CSV for completion")
    p.add_argument("--gt", help="ground-truth matrix CSV for completion")

    p = sub.add_parser("nrsfm", help="kernel-regularized non-rigid structure from motion")
    common(p)
    _add_solver_flags(p, tau=1e-4, max_inner=20, lm_iters=5)
    p.add_argument("--data", required=True, help=".mocap track file")
    p.add_argument("--gt", help="3F x N ground-truth shape CSV (overrides the file's section)")
    p.add_argument("--gt-cameras", action="store_true",
                   help="use the file's cameras and keep them fixed")
    p.add_argument("--init-tau", type=float, default=1e-7)

    p = sub.add_parser("kpca", help="closed-form robust kernel PCA of a labeled sample set")
    common(p)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    p.add_argument("--width", type=_width, default="dmed")
    p.add_argument("--data", required=True, help="labeled CSV, label in the last column")
    p.add_argument("--test", help="labeled CSV for 1-NN classification")
    p.add_argument("--gt", help="labeled CSV of clean samples for the manifold error")
    return parser


def _kernel(args, S):
    if args.kernel == "linear":
        return KernelModel.linear()
    if isinstance(args.width, float):
        return KernelModel.rbf(args.width)
    return KernelModel.rbf(select_width(S, args.width))


def _schedule(args, rho0):
    rho0 = rho0 if args.rho0 is None else args.rho0
    rho_max = 1e4 * rho0 if args.rho_max is None else args.rho_max
    return PenaltySchedule(rho0, rho_max, args.rho_scale)


def _lm(args):
    return LMConfig(max_iters=args.lm_iters)


def _load_completion(args):
    W = io.load_matrix(args.data)
    if args.mask:
        mask = io.load_matrix(args.mask)
        if mask.shape != W.shape or not np.all((mask == 0) | (mask == 1)):
            raise InvalidInputError("mask must be a 0/1 matrix shaped like the data")
        mask = mask.astype(bool) & np.isfinite(W)
    else:
        mask = np.isfinite(W)
    obs = MaskedObservations(np.where(mask, W, 0.0), mask)
    gt = io.load_matrix(args.gt) if args.gt else None
    if gt is not None and gt.shape != W.shape:
        raise InvalidInputError("ground truth must be shaped like the data")
    return obs, gt


def mean_impute(obs):
    counts = obs.mask.sum(axis=1)
    means = np.where(obs.mask, obs.values, 0.0).sum(axis=1) / np.maximum(counts, 1)
    return np.where(obs.mask, obs.values, means[:, None])


def _completion_metrics(S, obs, gt):
    if gt is None:
        return {}
    rms = completion_rms(S, gt, ~obs.mask)
    return {"completion_rms": rms.deleted, "completion_rms_all": rms.overall}


def cmd_synth(args):
    if not args.out:
        raise InvalidInputError("synth needs --out DIR")
    os.makedirs(args.out, exist_ok=True)
    files = {}
    if args.kind == "completion":
        inst = synth.synth_completion(args.n, args.dim, args.missing_prob, seed=args.seed,
                                      noise_sigma=args.noise)
        files = {"observed": "observed.csv", "mask": "mask.csv", "truth": "truth.csv"}
        io.save_matrix(np.where(inst.obs.mask, inst.obs.values, np.nan),
                       os.path.join(args.out, files["observed"]))
        io.save_matrix(inst.obs.mask.astype(int), os.path.join(args.out, files["mask"]))
        io.save_matrix(inst.truth, os.path.join(args.out, files["truth"]))
    elif args.kind == "manifold":
        man = synth.synth_manifold(args.n, args.dim, args.noise, seed=args.seed)
        files = {"samples": "samples.csv", "clean": "clean.csv"}
        io.save_labeled(os.path.join(args.out, files["samples"]), man.data)
        io.save_labeled(os.path.join(args.out, files["clean"]),
                        type(man.data)(man.clean, man.data.labels))
    else:
        inst = synth.synth_nrsfm(args.frames, args.points, args.amplitude, args.missing_prob,
                                 args.noise, seed=args.seed)
        files = {"tracks": "scene.mocap"}
        io.save_mocap(os.path.join(args.out, files["tracks"]), inst.obs, inst.shapes, inst.cameras)
    return {"files": {k: os.path.join(args.out, v) for k, v in files.items()}}


def cmd_complete(args):
    obs, gt = _load_completion(args)
    S0 = mean_impute(obs)
    kernel = _kernel(args, S0)
    rep = regularized_solve(CompletionLoss(obs), S0, kernel, args.tau, _schedule(args, 1.0),
                            inner_tol=args.inner_tol, max_inner=args.max_inner, lm=_lm(args),
                            max_stages=args.max_outer)
    if args.out:
        io.save_matrix(rep.S, args.out)
    out = {"solver": rep.summary(), "energy_trace": rep.energy_trace()}
    out["metrics"] = _completion_metrics(rep.S, obs, gt)
    if gt is not None:
        out["metrics"]["mean_imputation_rms"] = completion_rms(S0, gt, ~obs.mask).deleted
    return out


def cmd_tnh(args):
    if args.data.endswith(".mocap"):
        data = io.load_mocap(args.data)
        if data.cameras is None:
            raise InvalidInputError("TNH on tracks needs cameras in the .mocap file")
        S, res = tnh_solve(data.obs, None, data.cameras, args.tau, args.iters, return_result=True)
        metrics = {"e3d": e3d(S, data.ground_truth)} if data.ground_truth is not None else {}
    else:
        obs, gt = _load_completion(args)
        S, res = tnh_solve(obs, None, None, args.tau, args.iters, return_result=True)
        metrics = _completion_metrics(S, obs, gt)
    if args.out:
        io.save_matrix(S, args.out)
    return {"objective": res.objective, "iterations": res.iterations,
            "continuation_stages": res.stages, "metrics": metrics}


def cmd_nrsfm(args):
    data = io.load_mocap(args.data)
    gt = io.load_matrix(args.gt) if args.gt else data.ground_truth
    if args.gt_cameras and data.cameras is None:
        raise InvalidInputError("--gt-cameras given but the file has no camera section")
    kernel = KernelModel.linear() if args.kernel == "linear" else (
        KernelModel.rbf(args.width) if isinstance(args.width, float) else None)
    rep = nrsfm_solve(data.obs, args.tau, cameras=data.cameras if args.gt_cameras else None,
                      kernel=kernel, width=args.width if kernel is None else "dmed",
                      schedule=_schedule(args, 100 * args.tau), outer=args.max_outer or 5,
                      refine=not args.gt_cameras, init_tau=args.init_tau, lm=_lm(args),
                      inner_tol=args.inner_tol, max_inner=args.max_inner)
    if args.out:
        io.save_matrix(rep.shapes, args.out)
    out = {"solver": rep.summary(), "metrics": {}}
    if gt is not None:
        out["metrics"] = {"e3d": e3d(rep.shapes, gt), "e3d_init": e3d(rep.init_shapes, gt)}
    return out


def cmd_kpca(args):
    train = io.load_labeled(args.data)
    kernel = _kernel(args, train.data)
    K = kernel_matrix(train.data, kernel)
    basis = robust_kpca(K, ShrinkageParams(args.tau, args.rho))
    metrics = {"effective_rank": basis.effective_rank, "objective": basis.objective}
    if args.gt:
        clean = io.load_labeled(args.gt)
        if clean.data.shape != train.data.shape:
            raise InvalidInputError("clean samples must match the training samples")
        K_gt = kernel_matrix(clean.data, kernel)
        metrics["manifold_error"] = manifold_error(basis.gram(), K_gt)
        metrics["manifold_error_normalized"] = manifold_error(basis.gram(), K_gt, normalized=True)
    if args.test:
        test = io.load_labeled(args.test)
        cls = knn_classify(basis, train, test.data, kernel, test.labels, K_train=K)
        metrics["knn_error"] = cls.error_rate
    return {"kernel": {"family": kernel.family.value, "gamma": kernel.gamma},
            "spectrum": basis.spectrum.tolist(), "metrics": metrics}


COMMANDS = {"synth": cmd_synth, "complete": cmd_complete, "tnh": cmd_tnh,
            "nrsfm": cmd_nrsfm, "kpca": cmd_kpca}


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("report", "verbose")}


def run_command(argv):
    """Parse ``argv`` and run one command. Returns ``(exit_code, report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report = {"command": args.command, "version": __version__, "config": _config(args)}
    try:
        report.update(COMMANDS[args.command](args))
        report["status"] = "ok"
        code = 0
    except NLDRError as exc:
        report.update(status="error", category=exc.category, message=str(exc))
        code = exc.exit_code
    except OSError as exc:
        report.update(status="error", category="io", message=str(exc))
        code = 8
    text = json.dumps(report, indent=2, default=_json_default)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code, report


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv=None):
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
