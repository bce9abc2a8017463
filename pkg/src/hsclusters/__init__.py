"""Backward collision clusters in hard-sphere gases.

Event-driven molecular dynamics of elastic spheres in a box, exact
reconstruction of backward clusters from the collision log, kinetic-theory
reference values, and a seeded ensemble harness.
"""
from .clusters import (BackwardCluster, ClusterHistogram, ClusterStats, NoCollisionsError,
                       all_clusters, backward_cluster, cluster_moments, cluster_sizes,
                       histogram, mean_cardinality, mean_free_time_estimate, rate_statistic)
from .engine import (CollisionLog, CollisionRecord, Face, OverlapError, ParticleState,
                     SimConfig, SimulationError, SimulationResult, predict_pair_collision,
                     predict_wall_collision, resolve_pair_collision, resolve_wall_collision, run)
from .harness import (DEFAULT_ENSEMBLES, PUBLISHED_RATES, TABLE1_TIMES, EnsembleResult,
                      ExperimentError, ExperimentSpec, emit, reproduce_table1, run_experiment,
                      small_time_comparison)
from .initial import (InitialCondition, VelocityDistribution, make_initial_condition,
                      rng_stream, sample_positions, sample_velocities)
from .kinetics import (EquilibriumParams, collision_rate_maxwellian, equilibrium_mean_free_time,
                       maxwell_fn_mass, maxwell_mean_K, mean_collision_rate, scaling_map,
                       yule_sample_K, yule_sample_many)

__version__ = "0.1.0"
