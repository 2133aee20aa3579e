"""Baseline-corrected off-policy estimation and learning."""

from ._betaips import *  # noqa: F401,F403
from ._betaips import __doc__  # noqa: F401

__version__ = "0.1.0"
