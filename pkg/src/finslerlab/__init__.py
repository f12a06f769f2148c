"""finslerlab: a numerical laboratory for Finsler geometry.

Computes the curvature hierarchy of a user-specified Finsler metric
(fundamental/angular forms, Cartan and Matsumoto torsions, spray and
Berwald/Douglas curvatures, Landsberg and stretch curvatures, Riemann
and flag curvature, trace curvature along geodesics) through exact
truncated-Taylor forward differentiation, and verifies the pointwise
identities relating them over seeded samples.
"""

__version__ = "0.1.0"

from .classify import (
    ConditionalResult,
    GDWResult,
    PredicateResult,
    SpecialBerwaldFit,
    fit_special_berwald,
    gdw_check,
    predicates,
)
from .checks import CheckRecord, CheckReport, run_checks
from .curvature import (
    DEFAULT_ORDER,
    HORIZONTAL_ORDER,
    CurvatureContext,
    DegenerateFlagError,
    SprayData,
    Trajectory,
    angular,
    berwald,
    cartan,
    douglas,
    flag_curvature,
    fundamental,
    geodesic,
    h_curvature,
    hh_curvature,
    horizontal_derivative,
    landsberg,
    matsumoto,
    mean_berwald,
    mean_cartan,
    mean_landsberg,
    riemann,
    spray,
    spray_values,
    stretch,
)
from .expr import EvalDomainError, ParseError, parse_expression, to_text
from .jets import (
    Jet,
    JetAlgebra,
    JetDomainError,
    JetOrderError,
    algebra,
    lift,
    lift_point,
    partial_derivative,
)
from .metrics import (
    BUILTIN_METRICS,
    DomainError,
    EvalPoint,
    MetricDefinitionError,
    MetricSpec,
    SamplingError,
    builtin_metric,
    evaluate_F,
    fundamental_tensor,
    angular_metric,
    load_metric_file,
    make_metric,
    sample_point,
    sample_points,
)
from .tensors import (
    LOWER,
    UPPER,
    PointMismatchError,
    Tensor,
    ValenceError,
    antisym,
    contract,
    lower_slot,
    max_abs,
    raise_slot,
    rel_residual,
    sym,
)
