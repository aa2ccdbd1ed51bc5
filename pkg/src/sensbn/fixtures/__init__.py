"""Shipped fixture files and loaders.

``asia.net`` carries the standard literature parameterization of the
chest-clinic network; compiling it with the grouping (x_C, x_E, x_G) must
reproduce the published compound priors, which is how its provenance is
checked.  ``asia_tables.tree`` is the same model entered directly from
the published four-digit prior/factor tables.
"""

from __future__ import annotations

import os
from pathlib import Path

FIXTURE_DIR = Path(__file__).parent

#: environment variable that overrides where fixture-relative paths resolve
FIXTURE_ENV = "SENSBN_FIXTURES"


def fixture_dir() -> Path:
    override = os.environ.get(FIXTURE_ENV)
    return Path(override) if override else FIXTURE_DIR


def resolve(path) -> Path:
    """Use ``path`` as given if it exists, else look in the fixture dir."""
    p = Path(path)
    if p.exists():
        return p
    candidate = fixture_dir() / p
    if candidate.exists():
        return candidate
    builtin = FIXTURE_DIR / p
    if builtin.exists():
        return builtin
    return p


def asia_network():
    from .. import fileio

    return fileio.load_network(FIXTURE_DIR / "asia.net")


def asia_tables_tree():
    from .. import fileio

    return fileio.load_tree(FIXTURE_DIR / "asia_tables.tree")
