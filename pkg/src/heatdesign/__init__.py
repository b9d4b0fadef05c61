"""Optimal conductivity design for stationary heat conduction.

Given a balanced signed source distribution Q on a planar domain and a trace
budget, the library computes the Kantorovich norm of Q, an optimal 1-Lipschitz
potential, an optimal flux measure, and the rank-one conductivity tensor field
that minimizes thermal compliance under the trace budget.
"""

from .cli_io import (CliError, ProblemConfig, SolveReport, canonical_json,
                     emit_plots, load_config, parse_config, run_solve,
                     run_verify, write_config)
from .design import (ComplianceReport, DesignError, TensorField,
                     build_optimal_tensor, compliance_lower_bound,
                     compliance_report, energy, flux_consistency,
                     optimal_temperature, predicted_flux, support_condition)
from .geometry import (Domain2D, GeometryError, Grid, box, build_grid,
                       domain_area, geodesic_distance, point_in_domain,
                       segment_in_domain, unit_square)
from .measures import (ArcDensity, Atom, AreaDensity, BoundaryDensity,
                       MeasureError, RasterSource, SegmentDensity,
                       SourceMeasure, pair, rasterize, total_mass,
                       total_variation)
from .oracles import (EXAMPLE_BUILDERS, AnalyticSolution, bump_functions,
                      example_arc, example_brothers, example_diagonals,
                      example_nonconvex, example_segments, get_example,
                      weak_divergence_defect)
from .solver_flow import (FlowError, FlowNetwork, FlowSolution, build_network,
                          flow_to_flux, min_cost_flow, potential_field,
                          slackness_report)
from .solver_grid import (FluxMeasure, KantorovichSolution, PotentialField,
                          SolverError, SolverParams, discrete_div,
                          discrete_grad, duality_gap, effective_source,
                          feasibility_slack, solve)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
