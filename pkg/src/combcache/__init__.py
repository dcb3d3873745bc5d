"""Coded caching over combination networks: plans, exact loads and a decodability oracle."""
from .analysis import (GapReport, TradeoffCurve, cutset_lower_envelope, cutset_point, gap_report,
                       lower_convex_envelope, simplified_upper_bound, theorem1_curve, theorem1_load)
from .delivery_base import (compile_base, minimal_packets_per_subfile, phase1_plan, phase2_plan,
                            q_set, select_relays)
from .delivery_improved import compile_improved, improved_layout
from .errors import ConfigurationError, InvariantError, ParameterError, VerificationError
from .field import GF256, GF65536, FieldSpec, SpanBasis, SymbolVector, rlc_matrix, span_contains
from .placement import Placement, generate_multicast_messages, man_placement, worst_case_demand
from .plan import DeliveryPlan, Link, Transmission
from .topology import Topology, build_topology, rank_subset, unrank_subset
from .verification import (GridRow, SimulationConfig, VerificationReport, check_cell, exhaustive_check,
                           grid_csv, oracle_cost, simulate)

import types as _types

__all__ = sorted(n for n, v in globals().items() if not n.startswith("_") and not isinstance(v, _types.ModuleType))
