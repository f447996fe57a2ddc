"""Python interface to the sparseweak C++ library."""

import json

from ._sparseweak import (
    ComputationRefused,
    DyadicCube,
    PreconditionError,
    SparseFamily,
    YoungFunction,
    c_phi,
    conjugate,
    conjugate_inverse,
    dyadic_frac_maximal,
    generate_sparse,
    orlicz_maximal,
    sparse_operator,
    verify_sparse,
    weak_norm,
)
from ._sparseweak import weaktype_report as _weaktype_report


def run_weaktype(**options):
    """Run the weak-type experiment and return the parsed JSON report.

    Keyword names are config keys with the dot replaced by a double
    underscore, e.g. ``run__trials=10`` or ``grid__L=8``.
    """
    flat = {key.replace("__", "."): str(value) for key, value in options.items()}
    return json.loads(_weaktype_report(flat))


__all__ = [
    "ComputationRefused",
    "DyadicCube",
    "PreconditionError",
    "SparseFamily",
    "YoungFunction",
    "c_phi",
    "conjugate",
    "conjugate_inverse",
    "dyadic_frac_maximal",
    "generate_sparse",
    "orlicz_maximal",
    "run_weaktype",
    "sparse_operator",
    "verify_sparse",
    "weak_norm",
]
