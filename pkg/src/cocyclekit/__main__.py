"""python -m cocyclekit delegates to the CLI entry point."""

import sys

from cocyclekit.cli import main

if __name__ == "__main__":
    sys.exit(main())
