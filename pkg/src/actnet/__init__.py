"""Event-driven simulation and closed-form analysis of networks whose
vertices alternate between activated and quiescent states with power-law
sojourn times, with evolutionary prisoner's-dilemma dynamics on the
activated subgraph."""

__version__ = "0.1.0"

from .sampling import ActivationRates, RngStream, stream_rng
from .graphs import (
    ActiveMask,
    Graph,
    from_edges,
    gen_ban,
    gen_rrg,
    gen_wsn,
    generate,
    generate_connected,
    is_connected,
    largest_component_relative_size,
    load_edge_list,
    write_edge_list,
)
from .theory import (
    CoalescenceSolution,
    activation_probability,
    activated_moments,
    coalescence_solve,
    critical_bc,
    fixation_first_order,
    one_step_walk_prob,
    stationary_log_pmf,
    stationary_log_pmf_vector,
    subgraph_pmf,
)

__all__ = [
    "ActivationRates",
    "ActiveMask",
    "CoalescenceSolution",
    "Graph",
    "RngStream",
    "activation_probability",
    "activated_moments",
    "coalescence_solve",
    "critical_bc",
    "fixation_first_order",
    "from_edges",
    "gen_ban",
    "gen_rrg",
    "gen_wsn",
    "generate",
    "generate_connected",
    "is_connected",
    "largest_component_relative_size",
    "load_edge_list",
    "one_step_walk_prob",
    "stationary_log_pmf",
    "stationary_log_pmf_vector",
    "stream_rng",
    "subgraph_pmf",
    "write_edge_list",
]
