"""
Main entry point for the hypconvex command-line tool.
"""

import sys

from hypconvex.cli import main

if __name__ == "__main__":
    sys.exit(main())
