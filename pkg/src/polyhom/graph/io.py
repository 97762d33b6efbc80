"""Versioned JSON serialization of graphs.

Floats are written with ``repr`` (shortest round-trip form), which reloads
bit-identically.
"""

import json

import numpy as np

from .extended import ExtendedGraph
from .params import GraphParams

FORMAT_VERSION = 1


def graph_to_dict(G):
    return {
        "version": FORMAT_VERSION,
        "params": G.params.to_dict(),
        "window": G.window.tolist(),
        "positions": G.positions.tolist(),
        "volumetric_flags": G.volumetric.astype(int).tolist(),
        "edges": G.edges.tolist(),
        "simplices": G.simplices.tolist(),
        "fixture_only": G.fixture_only,
    }


def graph_from_dict(data):
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported graph format version {version!r}")
    d = len(data["window"][0])
    return ExtendedGraph(
        np.asarray(data["positions"], dtype=float).reshape(-1, d),
        np.asarray(data["volumetric_flags"], dtype=bool),
        np.asarray(data["edges"], dtype=np.int64).reshape(-1, 2),
        np.asarray(data["simplices"], dtype=np.int64).reshape(-1, d + 1),
        np.asarray(data["window"], dtype=float),
        params=GraphParams.from_dict(data["params"]),
        fixture_only=data.get("fixture_only", False),
    )


def save_graph(G, path):
    with open(path, "w") as fh:
        json.dump(graph_to_dict(G), fh)


def load_graph(path):
    with open(path) as fh:
        return graph_from_dict(json.load(fh))
