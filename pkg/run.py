import sys

from qpsi.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
