"""Pass/fail checks of group axioms, orbit separation, ball ratios and bound scalings (exit 3 on failure)."""
import sys

from symplan.cli import main

if __name__ == "__main__":
    sys.exit(main(["--task", "verify", *sys.argv[1:]]))
