"""Vertex deformations with boundary roles, and their binary snapshots."""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .._validation import check_box, check_lambda

FREE, SOFT, CLAMPED = 0, 1, 2
ROLE_NAMES = {FREE: "free", SOFT: "soft-boundary", CLAMPED: "clamped"}

_MAGIC = b"PHDF"
_VERSION = 1


def domain_vertices(G, D, eps=1.0):
    """Indices of graph vertices in the half-open box ``D / eps``."""
    box = check_box(D, G.dimension) / eps
    p = G.positions
    return np.flatnonzero(np.all((p >= box[0]) & (p < box[1]), axis=1))


def boundary_distance(points, box):
    """Distance from each point to the boundary of a box containing it."""
    return np.minimum(points - box[0], box[1] - points).min(axis=1)


@dataclass
class Deformation:
    """Values ``u(x)`` on the vertices of ``D_ε ∩ L``.

    Attributes
    ----------
    vertices : ndarray of int, shape (k,)
        Global vertex indices, increasing (graph order).
    values : ndarray, shape (k, n)
    roles : ndarray of int8, shape (k,)
        ``FREE``, ``SOFT`` or ``CLAMPED``.
    reference : ndarray, shape (k, n), optional
        Boundary datum ``φ(εx)/ε`` at each vertex.
    """

    vertices: np.ndarray
    values: np.ndarray
    roles: np.ndarray
    reference: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.vertices), -1)
        self.roles = np.asarray(self.roles, dtype=np.int8)
        if self.reference is not None:
            self.reference = np.asarray(self.reference, dtype=float).reshape(self.values.shape)

    @property
    def n_components(self):
        return self.values.shape[1]

    @property
    def free(self):
        return self.roles != CLAMPED

    def copy(self, values=None):
        return Deformation(
            self.vertices.copy(),
            self.values.copy() if values is None else np.asarray(values, dtype=float),
            self.roles.copy(),
            None if self.reference is None else self.reference.copy(),
        )

    def is_admissible(self, atol=0.0):
        """Soft vertices within distance < 1 of the datum, clamped ones equal to it."""
        if self.reference is None:
            return True
        dev = np.linalg.norm(self.values - self.reference, axis=1)
        soft = self.roles == SOFT
        clamped = self.roles == CLAMPED
        return bool(np.all(dev[soft] < 1.0) and np.all(dev[clamped] <= atol))

    @classmethod
    def from_map(cls, G, D, eps, phi, band=None, mode="clamped", values=None):
        """Deformation equal to ``φ(εx)/ε`` with boundary roles assigned.

        Parameters
        ----------
        phi : callable
            Macroscopic map applied to rows of ``ε x``; returns rows in ℝⁿ.
        band : float, optional
            Vertices within this distance of ``∂D_ε`` get the boundary role.
            Defaults to the interaction range ``C0``.
        mode : {"clamped", "soft"}
        """
        idx = domain_vertices(G, D, eps)
        x = G.positions[idx]
        ref = np.atleast_2d(np.asarray(phi(eps * x), dtype=float) / eps)
        if ref.shape[0] != len(idx):
            ref = ref.T
        band = G.params.interaction_range if band is None else band
        box = check_box(D, G.dimension) / eps
        near = boundary_distance(x, box) <= band
        roles = np.full(len(idx), FREE, dtype=np.int8)
        roles[near] = CLAMPED if mode == "clamped" else SOFT
        vals = ref.copy() if values is None else np.asarray(values, dtype=float)
        return cls(idx, vals, roles, ref)

    @classmethod
    def affine(cls, G, D, eps, Lambda, band=None, mode="clamped"):
        """Deformation ``u(x) = Λ x`` (the datum ``φ_Λ``)."""
        L = check_lambda(Lambda, None, G.dimension)
        return cls.from_map(G, D, eps, lambda y: y @ L.T, band=band, mode=mode)


def save_deformation(path, u, meta=None):
    """Write a snapshot: magic, header length, JSON header, then raw little-endian arrays."""
    header = {
        "version": _VERSION,
        "k": int(len(u.vertices)),
        "n": int(u.n_components),
        "has_reference": u.reference is not None,
        "arrays": ["vertices<i8", "roles<i1", "values<f8"] + (["reference<f8"] if u.reference is not None else []),
        "meta": meta or {},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(u.vertices.astype("<i8").tobytes())
        fh.write(u.roles.astype("<i1").tobytes())
        fh.write(u.values.astype("<f8").tobytes())
        if u.reference is not None:
            fh.write(u.reference.astype("<f8").tobytes())


def load_deformation(path):
    """Inverse of :func:`save_deformation`; returns ``(deformation, meta)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a deformation snapshot")
        (size,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(size))
        if header.get("version") != _VERSION:
            raise ValueError(f"unsupported snapshot version {header.get('version')!r}")
        k, n = header["k"], header["n"]
        vertices = np.frombuffer(fh.read(8 * k), dtype="<i8")
        roles = np.frombuffer(fh.read(k), dtype="<i1")
        values = np.frombuffer(fh.read(8 * k * n), dtype="<f8").reshape(k, n)
        ref = None
        if header["has_reference"]:
            ref = np.frombuffer(fh.read(8 * k * n), dtype="<f8").reshape(k, n)
    return Deformation(vertices.copy(), values.copy(), roles.copy(), None if ref is None else ref.copy()), header["meta"]
