"""Print the free-space fraction of generated worlds, to pick world-generation parameters.

    python3 scripts/tune_free_fraction.py --dim 2 --alpha 0.45 --seeds 10
"""
import argparse
from dataclasses import replace

import numpy as np

from symplan.bench import make_objects
from symplan.worldgen import WorldGenParams, free_fraction, gen_world


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--object", default=None, help="catalogue name (default: square in 2D, cube in 3D)")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n-clusters", type=int, default=None)
    p.add_argument("--spread", type=float, default=None)
    args = p.parse_args(argv)

    base = WorldGenParams() if args.dim == 2 else WorldGenParams.default_3d()
    overrides = {k: v for k, v in (("n_points", args.n_points), ("alpha", args.alpha),
                                   ("n_clusters", args.n_clusters), ("cluster_spread", args.spread)) if v is not None}
    objects = make_objects(args.object or ("square" if args.dim == 2 else "cube"), args.dim)
    fr = []
    for s in range(args.seeds):
        world = gen_world(replace(base, seed=s, **overrides))
        fr.append(free_fraction(world, objects, args.samples, np.random.default_rng(s)))
        print(f"seed {s:3d}  obstacles {len(world.obstacles):3d}  free {fr[-1]:.3f}")
    print(f"mean free fraction {np.mean(fr):.3f} (sd {np.std(fr):.3f})")


if __name__ == "__main__":
    main()
