"""Cooperative spectrum sensing with linear soft fusion and a binary GA."""

__version__ = "0.1.0"

from .detection import (
    EnergySample,
    FusionStatistics,
    Hypothesis,
    Scenario,
    ScenarioSpec,
    generate_scenario,
    q_tail,
    q_tail_inverse,
    simulate_energies,
    statistics,
)
from .fusion import (
    DegenerateWeightsError,
    Scheme,
    SchemeResult,
    detection_pair,
    evaluate_scheme,
    normalize,
    or_rule_hdf,
    pd_given_pf,
    pf_given_pd,
    weights_egc,
    weights_mdc,
    weights_mrc,
    weights_ndc,
)
from .bga import GaConfig, GaRun, run_bga
