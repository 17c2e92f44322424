"""Paired aware/unaware benchmark; same flags as ``symplan --task experiment``."""
import sys

from symplan.cli import main

if __name__ == "__main__":
    sys.exit(main(["--task", "experiment", *sys.argv[1:]]))
