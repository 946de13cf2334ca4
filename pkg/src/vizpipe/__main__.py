"""Allow ``python -m vizpipe`` as an alias for the ``vizpipe`` script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
