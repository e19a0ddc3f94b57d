"""Multiband downlink scheduling simulator with exact solvers in the loop.

Kept import-light on purpose: the `solve` subcommand is spawned as a child
process once per scheduling call in the external pathway, so nothing heavy
may load at package import time.
"""

__version__ = "0.1.0"
