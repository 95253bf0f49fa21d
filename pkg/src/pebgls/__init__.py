"""Guided local search for the symmetric TSP, with parallel cooperative
variants exchanging best solutions over ring and torus topologies."""

from .engine import (GlsEngine, GlsParams, PenaltyTable, augmented_cost,
                     compute_lambda, penalize, utility)
from .metrics import (Event, RunRecord, best_contributor_stats,
                      communications_per_10k_iterations, efficiency, excess,
                      golden_edges_from_tours, mann_whitney_u, speedup_s1,
                      speedup_s2, undesirable_penalty_ratio)
from .runtime import (ConfigError, EliteState, Mailbox, MailboxClosed,
                      ParallelResult, SolutionMsg, StopCriteria, StopSignal,
                      Topology, Worker, build_topology, run_parallel)
from .search import ActivationBits, BestSoFar, NeighborLists, Tour, local_search, tour_cost
from .tsplib import (ContractViolation, TspInstance, TsplibParseError,
                     bundled_path, dump_tsplib, edge_cost, known_optimum,
                     load_instance, load_tour, parse_tour, parse_tsplib,
                     random_instance)

__version__ = "0.1.0"
