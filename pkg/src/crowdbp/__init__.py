"""Majority-correlation message passing for unsupervised crowdsourcing."""
from .assignment import (
    Assignment, AssignmentError, degree_regular_assignment, girth, one_hop_neighbors,
)
from .iteration import (
    MetataskConfig, SeriesConfig, Variant, WeightState, decide, hard_decision_step, init_weights,
    kos_step, normalized_step, run_metatask_series, run_single_metatask, step,
)
from .population import (
    AnswerMatrix, Population, ReliabilitySpec, answer_moments, make_population, sample_answers,
    sample_reliabilities,
)
from .theory import (
    CrowdMoments, MomentPrediction, approx_first_moments, asymptotic_decision,
    convergence_condition, exact_first_moments, series_mean, series_variance_bound,
)

__version__ = "0.1.0"
