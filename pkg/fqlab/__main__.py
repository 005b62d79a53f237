"""Permite executar `python -m fqlab <comando>`."""

import sys

from fqlab.cli.main import main


if __name__ == "__main__":
    sys.exit(main())
