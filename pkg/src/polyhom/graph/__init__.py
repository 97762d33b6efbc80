"""Random admissible graphs and their Delaunay/Voronoi structures."""

from .extended import ExtendedGraph
from .generate import generate_graph, lattice_fixture
from .geometry import VoronoiCells, delaunay, lattice_triangulation, voronoi
from .io import graph_from_dict, graph_to_dict, load_graph, save_graph
from .params import GraphParams
from .validate import ValidationReport, delone_sandwich, interior_voronoi_cells, validate_graph

__all__ = [
    "ExtendedGraph",
    "GraphParams",
    "ValidationReport",
    "VoronoiCells",
    "delaunay",
    "delone_sandwich",
    "generate_graph",
    "graph_from_dict",
    "graph_to_dict",
    "interior_voronoi_cells",
    "lattice_fixture",
    "lattice_triangulation",
    "load_graph",
    "save_graph",
    "validate_graph",
    "voronoi",
]
