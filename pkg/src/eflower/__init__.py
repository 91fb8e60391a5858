"""Elliptic flower billiards: table construction, exact dynamics, analysis."""

__version__ = "0.1.0"

from .geometry import (
    BasePolygon,
    ClosureError,
    ConstructionError,
    DegenerateCoreError,
    DegenerateEllipseError,
    Ellipse,
    EllipticArc,
    FlowerTable,
    InvalidParameterError,
    StringCurve,
    ZonePartition,
    build_corner_flower,
    build_sol_flower,
    circle_table,
    compute_core_polygon,
    defocusing_check,
    diagonal_center_distance,
    ellipse_from_foci,
    ellipse_table,
    is_absolutely_focusing,
    make_regular_polygon,
    max_osculating_radius,
    maximal_osculating_circle,
    small_diagonal,
    string_construction,
    validate_structural,
    zone_partition,
)
from .dynamics import (
    OrbitRecord,
    PhaseState,
    SingularOrbitError,
    billiard_map,
    birkhoff_jacobian,
    continue_orbit,
    ellipse_chord_invariant,
    next_collision,
    random_states,
    reflect,
    state_from_arc_param,
    state_from_point_direction,
    state_from_s_phi,
    tangent_map_step,
    trace_orbit,
)
from .analysis import (
    DecayFit,
    LyapunovEstimate,
    OrbitClass,
    autocorrelation_decay,
    classify_orbit,
    component_measure_fraction,
    find_period2_minor_axis_orbits,
    fit_decay,
    lyapunov_exponent,
    phase_portrait,
    sample_classified_states,
    two_mirror_trace,
)
from .serialize import load_table, save_table
