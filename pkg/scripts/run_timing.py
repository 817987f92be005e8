#!/usr/bin/env python3
"""Two-task solver wall-time comparison; forwards to `sparse-consist timing`."""

import sys

from sparse_consist.cli import main

if __name__ == "__main__":
    sys.exit(main(["timing", *sys.argv[1:]]))
