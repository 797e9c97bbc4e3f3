from .backends import llm_backend, make_suite, template_backend
from .core import PlacementPlan, ProposerSuite, plan, prefix_supported, validate_and_order
from .grid import OccupancyGrid
from .templates import PAPER_PROMPTS, TEMPLATES, ShapeTemplate, lookup

__all__ = [
    "OccupancyGrid",
    "PAPER_PROMPTS",
    "PlacementPlan",
    "ProposerSuite",
    "ShapeTemplate",
    "TEMPLATES",
    "llm_backend",
    "lookup",
    "make_suite",
    "plan",
    "prefix_supported",
    "template_backend",
    "validate_and_order",
]
