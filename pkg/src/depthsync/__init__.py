"""Robust rotation synchronization with Tukey-depth based solvers."""

from .dds import DdsConfig, dds_run, dds_update_node, normalization_spread
from .depth import (
    DepthInterval,
    Rule,
    SelectionRule,
    depth_region_1d,
    max_depth_point,
    trimmed_mean_1d,
    tukey_depth,
    tukey_depth_1d,
)
from .graph import (
    MeasurementGraph,
    corruption_stats,
    is_well_connected,
    load_graph,
    make_complete,
    make_erdos_renyi,
    neighborhoods,
    save_graph,
)
from .l1mra import (
    coordinate_energy,
    directional_derivative,
    gd_l1_run,
    gd_l1_update_node,
    is_coordinatewise_fixed,
    l1_energy,
)
from .manifold import (
    Ball,
    angular_distance,
    exp_map,
    geodesic_distance,
    log_map,
    random_rotation,
    smallest_enclosing_ball,
)
from .scenario import (
    Scenario,
    corrupt_consistent,
    corrupt_random,
    generate_ground_truth,
    load_scenario,
    make_scenario,
    save_scenario,
    spurious_fixture,
)
from .tas import TasConfig, tas_run, tas_update_node
from .trace import RunTrace, SyncState

__version__ = "0.1.0"
