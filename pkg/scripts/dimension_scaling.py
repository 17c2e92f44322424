"""BiRRT runs and quotient-distance timings for m = 1..M rectangle copies.

    python3 scripts/dimension_scaling.py --max-objects 5 --worlds 2 --pairs 10
"""
import sys

from symplan.cli import main

if __name__ == "__main__":
    sys.exit(main(["--task", "scaling", *sys.argv[1:]]))
