#!/usr/bin/env python3
"""Bit-depth sweep; forwards all flags to `sparse-consist dequant-bench`."""

import sys

from sparse_consist.cli import main

if __name__ == "__main__":
    sys.exit(main(["dequant-bench", *sys.argv[1:]]))
