"""
__main__.py - Entry point for `python -m nash_evo`.
"""

import sys

from nash_evo.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
