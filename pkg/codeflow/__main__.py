"""python -m codeflow"""

import sys

from codeflow.cli import main

if __name__ == "__main__":
    sys.exit(main())
