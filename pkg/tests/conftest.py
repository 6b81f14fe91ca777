"""Make the sibling oracle helpers importable as ``oracles`` from any cwd."""

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))
