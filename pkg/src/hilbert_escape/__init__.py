"""Heights, cusp itineraries, Bowen-ball covers and escape of mass on Hilbert modular spaces."""

from .covering import (
    BowenSpec,
    CoverReport,
    bowen_contains,
    conjugated_ball_cover,
    decompose_box,
    entropy_estimate,
    greedy_cover,
    inductive_cover_count,
    mass_entropy_check,
)
from .escape import (
    average_pushforward,
    escape_fraction,
    kappa_bound_check,
    mass_bound_check,
    unstable_dimension_estimate,
)
from .flow import FlowElement, itinerary, step_point, step_vector, trajectory_heights
from .measures import DiscreteMeasure
from .module_space import SpacePoint, height, identity_point, is_primitive, short_vectors
from .number_field import ConfigurationError, EnumerationCapError, FieldSpec, parse_field
from .partitions import PLabel, QLabel, count_p_refinement, count_q_labels, p_label, q_label

__version__ = "0.1.0"

__all__ = [
    "BowenSpec", "CoverReport", "bowen_contains", "conjugated_ball_cover", "decompose_box",
    "entropy_estimate", "greedy_cover", "inductive_cover_count", "mass_entropy_check",
    "average_pushforward", "escape_fraction", "kappa_bound_check", "mass_bound_check",
    "unstable_dimension_estimate", "FlowElement", "itinerary", "step_point", "step_vector",
    "trajectory_heights", "DiscreteMeasure", "SpacePoint", "height", "identity_point",
    "is_primitive", "short_vectors", "ConfigurationError", "EnumerationCapError", "FieldSpec",
    "parse_field", "PLabel", "QLabel", "count_p_refinement", "count_q_labels", "p_label",
    "q_label",
]
