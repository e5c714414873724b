"""TNH versus kernel-regularized NRSfM with ground-truth cameras.

Runs the synthetic articulated scene by default, or every ``.mocap`` file
given on the command line (ground truth and cameras must be present).

    python scripts/nrsfm_benchmark.py --seeds 2 --missing-prob 0.5
    python scripts/nrsfm_benchmark.py data/drink.mocap data/yoga.mocap
"""
import argparse
import os

from nldreg.io import load_mocap
from nldreg.metrics import e3d
from nldreg.pipeline import PenaltySchedule, nrsfm_solve
from nldreg.problems import tnh_solve
from nldreg.synth import synth_nrsfm


def compare(name, obs, cameras, gt, args):
    S_tnh = tnh_solve(obs, None, cameras, args.tnh_tau)
    schedule = PenaltySchedule(args.rho0_mult * args.tau, args.rho0_mult * args.tau * 1e4)
    row = {"name": name, "tnh": e3d(S_tnh, gt)}
    for width in args.widths:
        rep = nrsfm_solve(obs, args.tau, cameras=cameras, refine=False, width=width,
                          schedule=schedule)
        row[width] = e3d(rep.shapes, gt)
        row[width + "_s"] = rep.wall_time
    cells = " ".join(f"{row[w]:8.4f} ({row[w + '_s']:4.0f}s)" for w in args.widths)
    print(f"{name:>16} {row['tnh']:8.4f} {cells}", flush=True)
    return row


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("files", nargs="*", help=".mocap files; synthetic scenes when empty")
    p.add_argument("--seeds", type=int, default=2)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--points", type=int, default=30)
    p.add_argument("--amplitude", type=float, default=0.35)
    p.add_argument("--missing-prob", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--tnh-tau", type=float, default=1e-7)
    p.add_argument("--rho0-mult", type=float, default=1.0, help="first penalty as a multiple of tau")
    p.add_argument("--widths", nargs="+", default=["dmed"], choices=["dmed", "dmax"])
    args = p.parse_args()

    print(f"{'scene':>16} {'TNH':>8} " + " ".join(f"{w:>16}" for w in args.widths))
    if args.files:
        for path in args.files:
            data = load_mocap(path)
            if data.ground_truth is None or data.cameras is None:
                raise SystemExit(f"{path}: needs ground-truth and camera sections")
            compare(os.path.basename(path), data.obs, data.cameras, data.ground_truth, args)
        return
    for seed in range(args.seeds):
        inst = synth_nrsfm(args.frames, args.points, args.amplitude, args.missing_prob, seed=seed)
        compare(f"synthetic/{seed}", inst.obs, inst.cameras, inst.shapes, args)


if __name__ == "__main__":
    main()
