"""Certificate-carrying computer algebra for space-time foam algebras of generalized functions."""

from .algebra import AlgebraContext, FoamElement, eq
from .certs import BAIRE_I, M0, ND, PointwiseCertificate, UniformCertificate, check_pointwise
from .collapse import brute_force_membership, collapse, synthesize_certificate
from .expr import Expr
from .nets import CofinalMapped, Naturals, Net, PiecewiseExpr, ProductNN
from .parser import parse_expr, parse_region
from .region import Box, RegionSet
from .verdict import Verdict

__version__ = "0.1.0"

__all__ = ["AlgebraContext", "FoamElement", "eq", "BAIRE_I", "M0", "ND", "PointwiseCertificate",
           "UniformCertificate", "check_pointwise", "brute_force_membership", "collapse", "synthesize_certificate",
           "Expr", "CofinalMapped", "Naturals", "Net", "PiecewiseExpr", "ProductNN", "parse_expr", "parse_region",
           "Box", "RegionSet", "Verdict"]
