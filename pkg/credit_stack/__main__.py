"""Allow `python -m credit_stack`."""

import sys

from .cli import main

sys.exit(main())
