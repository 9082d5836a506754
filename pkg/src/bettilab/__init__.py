"""Numerical laboratory for sections of elliptic surfaces in Legendre form.

Modules: ``uhp`` (geometry on H x C), ``periods`` (periods and elliptic
logarithms), ``surface`` (exact surface bookkeeping and lifts),
``verticality`` (verticality and Betti multiplicities), ``height``
(canonical heights) and ``harness`` (campaigns and reports).
"""

from . import harness, height, periods, surface, uhp, verticality
from .surface import SurfaceSpec, fixture_spec, parse_spec_text

__all__ = [
    "harness", "height", "periods", "surface", "uhp", "verticality",
    "SurfaceSpec", "fixture_spec", "parse_spec_text",
]
__version__ = "0.1.0"
