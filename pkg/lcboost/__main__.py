"""Allows `python -m lcboost`."""

import sys

from lcboost.pipeline import main

sys.exit(main())
