"""Allow ``python -m unsupcal``."""

import sys

from .cli import main

sys.exit(main())
