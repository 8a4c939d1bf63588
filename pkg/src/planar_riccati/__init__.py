"""Qualitative analysis of planar linear ODE systems through their Riccati equations."""

from ._jit import JIT_ENABLED, backend_name
from .coeffexpr import CoeffExpr, SignCertificate, evaluate, parse, sign_certify
from .integrate import (
    BlowUpReport,
    RiccatiSpec,
    SystemSpec,
    Trajectory,
    lift_riccati,
    solve_riccati,
    solve_riccati_complex,
    solve_system,
    zero_sets,
)
from .quadrature import (
    HorizonPolicy,
    IntegralVerdict,
    Signal,
    classify_improper,
    transform_Iminus,
    transform_Iplus,
    transform_J,
    transform_mu_nu,
)

from .riccati import (
    NoRegularSolutionError,
    classify_solution_role,
    extremal_from_normal,
    find_bracket,
    reg_boundary,
)
from .oscillation import (
    classify_oscillation,
    fundamental_frame,
    leighton_test,
    principles_check,
    second_order_system,
)
from .systemreg import classify_regularity, minimal_solution, ratio_box_check
from .nonconj import case_report, nonconjugation_check
from .bounds import (
    classical_envelopes,
    envelope_verify,
    log_integral_bounds,
    riccati_envelope,
    stability_check,
    system_envelopes,
)
from ._report import HypothesisError, Record

__version__ = "0.1.0"
