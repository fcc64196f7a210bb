"""Spherical conical metrics and their second Laplace eigenfunctions.

The package studies metrics of curvature 1 with conical points, presented
through a (possibly multivalued) meromorphic map into the sphere.  It can

* do exact arithmetic on maps twisted by a single branched power
  (:mod:`coneig.algebra`),
* locate cone points, evaluate the metric, and verify candidate
  eigenfunctions numerically (:mod:`coneig.metric`),
* compute the rotation monodromy of a map along loops and classify it
  (:mod:`coneig.monodromy`),
* decide which members of a family can carry an extra second eigenfunction,
  via residues of quadratic differentials (:mod:`coneig.quaddiff`),
* rebuild the vector-valued potential of an eigenfunction by contour
  integration and test its boundedness (:mod:`coneig.weierstrass`),
* run the directrix-curve construction that produces new metrics with
  extra eigenfunctions (:mod:`coneig.twistor`).

The ``coneig`` command line (or ``python -m coneig``) exposes the same
pipelines as JSON-report subcommands.
"""

from .algebra import (
    ExpPoly,
    PoleError,
    TwistedRational,
    from_json,
    load_map,
    poly_roots,
    save_map,
    to_json,
)
from .metric import (
    ConePoint,
    ConicalMetric,
    EigenCandidate,
    annulus_grid,
    cone_points,
    eigen_residual,
    metric_density,
    stereographic,
    verify_on_grid,
    x_from_u,
)
from .twistor import (
    BilinearSpace,
    ConstructionError,
    ConstructionResult,
    DirectrixCurve,
    IsotropicPlane,
    SpecialBasis,
    default_plane,
    directrix_family,
    extra_eigenfunctions,
    isotropy_verify,
    limiting_map,
    random_plane,
    run_algorithm,
    solve_coefficients,
    special_basis,
    verify_candidates,
)

__version__ = "0.1.0"

__all__ = [
    "ExpPoly",
    "TwistedRational",
    "PoleError",
    "poly_roots",
    "to_json",
    "from_json",
    "save_map",
    "load_map",
    "ConePoint",
    "ConicalMetric",
    "EigenCandidate",
    "annulus_grid",
    "cone_points",
    "eigen_residual",
    "metric_density",
    "stereographic",
    "verify_on_grid",
    "x_from_u",
    "BilinearSpace",
    "DirectrixCurve",
    "IsotropicPlane",
    "SpecialBasis",
    "ConstructionResult",
    "ConstructionError",
    "directrix_family",
    "solve_coefficients",
    "isotropy_verify",
    "default_plane",
    "random_plane",
    "special_basis",
    "limiting_map",
    "extra_eigenfunctions",
    "verify_candidates",
    "run_algorithm",
    "__version__",
]
