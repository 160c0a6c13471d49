"""quadair: desk-scale toolkit for multi-modal (legged + aerial) quadruped
navigation: reduced-order simulation, trot gaits, reference-governor ground
control, cascaded flight control, and mode-aware graph planning."""

from .config import GovernorSettings, MissionSettings, RobotConfig, load_config, save_config
from .environment import Box, Environment, load_demo_environment, load_environment, save_environment
from .flight import FlightGains, attitude_loop, flight_command, mixer, position_loop
from .gait import GaitSchedule, gait_phase, stability_margin, support_polygon, swing_trajectory
from .governor import GovernorState, friction_pyramid_ok, governor_update, track_feet
from .kinematics import (
    BodyState,
    ContactState,
    LegConfig,
    RobotParams,
    foot_position,
    leg_ik,
)
from .dynamics import contact_forces, mechanical_energy, meter_power, step
from .mission import (
    MissionAbort,
    calibrate_cost_model,
    compare_discretizations,
    flat_environment,
    follow_plan,
    lean_maneuver,
    limit_cycle_metric,
    stability_margin_trace,
    trot_in_place,
)
from .missionlog import MissionLog, load_log, save_log, validate_log
from .planner import (
    CostModel,
    ModalGraph,
    Mode,
    Plan,
    astar,
    dijkstra,
    discretize_mmprm,
    discretize_uniform,
    edge_cost,
    load_graph,
    load_plan,
    nearest_node,
    save_graph,
    save_plan,
)

__version__ = "0.1.0"
