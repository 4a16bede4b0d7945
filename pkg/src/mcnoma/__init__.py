"""Two-user Gaussian rate regions and a two-cell NOMA system simulator."""

from .rates import ParetoFrontier, RatePoint, pareto_frontier, region_dominates, shannon_rate

__all__ = ["ParetoFrontier", "RatePoint", "pareto_frontier", "region_dominates", "shannon_rate"]
__version__ = "0.1.0"
