#!/usr/bin/env python
"""Utilitário de linha de comando do HolderTensor."""

import sys


def main():
    """Despacha para a CLI do bench."""
    from apps.bench.cli import main as cli_main

    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
