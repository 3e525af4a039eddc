"""Community genealogy graphs from posting histories.

Build parent -> child edges between communities from where each new
community's first members were recently active, characterize how those
graphs evolve, and run the growth and early-member prediction protocols.
"""
from genealogy.corpus import CorpusIndex, Event, build_index, eligible_children, parse_events
from genealogy.graph import (GenealogyEdge, GenealogyGraph, ParentStats, build_genealogy,
                             emergence_curve, parent_edges, property_time_series,
                             recent_communities)

__version__ = "0.1.0"

__all__ = [
    "CorpusIndex", "Event", "GenealogyEdge", "GenealogyGraph", "ParentStats",
    "build_genealogy", "build_index", "eligible_children", "emergence_curve",
    "parent_edges", "parse_events", "property_time_series", "recent_communities",
]
