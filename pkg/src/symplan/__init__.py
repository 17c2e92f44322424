"""Sampling-based motion planning on configuration spaces quotiented by object symmetries."""
from .collision import CollisionChecker, ConvexShape, MovingObject, World
from .geometry import Config, ConfigSpace, MetricWeights, Rotation2, Rotation3, dist_config, geodesic
from .planners import PlannerParams, PlanResult, Problem, birrt, plan, prm_star, rrt, rrt_star
from .quotient import ClassPoint, QuotientSpace, Roadmap, lift_path, q_dist
from .symmetry import SymmetryGroup, act, make_cyclic_2d, orbit, trivial_group

__all__ = [
    "ClassPoint", "CollisionChecker", "Config", "ConfigSpace", "ConvexShape", "MetricWeights",
    "MovingObject", "PlanResult", "PlannerParams", "Problem", "QuotientSpace", "Roadmap",
    "Rotation2", "Rotation3", "SymmetryGroup", "World", "act", "birrt", "dist_config", "geodesic",
    "lift_path", "make_cyclic_2d", "orbit", "plan", "prm_star", "q_dist", "rrt", "rrt_star",
    "trivial_group",
]
