from .common import (
    MARGINAL_BAND,
    AnalysisError,
    Certificate,
    Condition,
    GainReport,
    StabilityReport,
    UnsupportedRequest,
    p_label,
    parse_p,
)
from .gains import bisect_gain, closed_form_gain, gain, gain_lp_matrix, performance_spec, steady_form
from .lft import analyze_ilc, analyze_lft
from .stability import (
    analyze,
    analyze_coupled,
    analyze_difference,
    analyze_discrete,
    analyze_distributed,
    analyze_lti,
    analyze_neutral,
)


def _gain_for(kind: str):
    def fn(sys, p, method: str = "both") -> GainReport:
        if sys.kind != kind:
            raise AnalysisError(f"expected a {kind} system, got {sys.kind}")
        return gain(sys, p, method)

    fn.__name__ = f"gain_{kind}"
    fn.__doc__ = f"L_p gain of a {kind} system (see ``gain``)."
    return fn


gain_lti = _gain_for("lti")
gain_discrete = _gain_for("discrete")
gain_difference = _gain_for("difference")
gain_coupled = _gain_for("coupled")
gain_distributed = _gain_for("distributed")
gain_neutral = _gain_for("neutral")

__all__ = [
    "MARGINAL_BAND",
    "AnalysisError",
    "Certificate",
    "Condition",
    "GainReport",
    "StabilityReport",
    "UnsupportedRequest",
    "analyze",
    "analyze_coupled",
    "analyze_difference",
    "analyze_discrete",
    "analyze_distributed",
    "analyze_ilc",
    "analyze_lft",
    "analyze_lti",
    "analyze_neutral",
    "bisect_gain",
    "closed_form_gain",
    "gain",
    "gain_coupled",
    "gain_difference",
    "gain_discrete",
    "gain_distributed",
    "gain_lp_matrix",
    "gain_lti",
    "gain_neutral",
    "p_label",
    "parse_p",
    "performance_spec",
    "steady_form",
]
