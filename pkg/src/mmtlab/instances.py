"""Instance generation and JSON persistence.

An instance is a named finite point set, given either by embedding
coordinates or by a covariance matrix, together with a prior and the seed
that produced it. Files are UTF-8 JSON with sorted keys; floats use
Python's shortest round-trip repr, so save/load is bit-stable.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadParams, IoError
from .process_core import EmbeddedProcess, Prior, embed, make_prior, process_from_points
from .rng import substream

INSTANCE_STREAM = 0

FAMILIES = ("two_point", "orthonormal", "simplex", "cloud", "ultrametric")


@dataclass(eq=False)
class Instance:
    name: str
    dim: int
    prior: np.ndarray
    seed: int
    points: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.points is None) == (self.covariance is None):
            raise BadParams("exactly one of points/covariance must be present")
        n = self.points.shape[0] if self.points is not None else self.covariance.shape[0]
        if self.prior.shape != (n,):
            raise BadParams("prior length must match the point count")
        if np.any(self.prior < 0.0) or abs(float(self.prior.sum()) - 1.0) > 1e-9:
            raise BadParams("prior must be a probability vector")

    @property
    def n(self) -> int:
        return self.prior.shape[0]


def instance_process(inst: Instance) -> EmbeddedProcess:
    if inst.points is not None:
        return process_from_points(inst.points)
    return embed(inst.covariance)


def instance_prior(inst: Instance) -> Prior:
    return make_prior(inst.prior)


def _unit_ball(rng: np.random.Generator, size: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((size, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.random(size) ** (1.0 / dim)
    return g * radii[:, None]


def _ultrametric_matrix(rng: np.random.Generator, size: int) -> np.ndarray:
    dm = np.zeros((size, size))

    def split(leaves, depth):
        if len(leaves) <= 1:
            return
        order = rng.permutation(len(leaves))
        cut = int(rng.integers(1, len(leaves)))
        left = [leaves[i] for i in order[:cut]]
        right = [leaves[i] for i in order[cut:]]
        for a in left:
            for b in right:
                dm[a, b] = dm[b, a] = 2.0 ** (-depth)
        split(left, depth + 1)
        split(right, depth + 1)

    split(list(range(size)), 0)
    return dm


def generate_instance(family: str, size: int, dim: Optional[int] = None,
                      seed: int = 0, prior=None) -> Instance:
    """Deterministic instance from (family, size, dim, seed).

    cloud draws i.i.d. uniform points in the unit ball of R^dim; ultrametric
    builds a random binary tree with cross-distances halving per level and
    stores the centered covariance that realizes it.
    """
    if family not in FAMILIES:
        raise BadParams(f"unknown family {family!r}")
    if size < 1:
        raise BadParams("size must be at least 1")
    if dim is None:
        dim = size
    if dim < 1:
        raise BadParams("dim must be at least 1")
    if prior is None:
        pw = np.full(size, 1.0 / size)
    else:
        pw = make_prior(prior).weights
        if pw.shape != (size,):
            raise BadParams("prior length must match size")

    name = f"{family}_n{size}_d{dim}_s{seed}"
    points = None
    cov = None
    if family == "two_point":
        if size != 2:
            raise BadParams("two_point requires size 2")
        points = np.zeros((2, dim))
        points[0, 0] = 0.5
        points[1, 0] = -0.5
    elif family == "orthonormal":
        if dim < size:
            raise BadParams("orthonormal requires dim >= size")
        points = np.eye(size, dim)
    elif family == "simplex":
        if dim < size:
            raise BadParams("simplex requires dim >= size")
        points = np.eye(size, dim) / math.sqrt(2.0)
        points -= points.mean(axis=0, keepdims=True)
    elif family == "cloud":
        rng = substream(seed, INSTANCE_STREAM, 0)
        points = _unit_ball(rng, size, dim)
    else:  # ultrametric
        rng = substream(seed, INSTANCE_STREAM, 0)
        dm = _ultrametric_matrix(rng, size)
        d2 = dm * dm
        J = np.eye(size) - np.full((size, size), 1.0 / size)
        cov = -0.5 * J @ d2 @ J
        cov = 0.5 * (cov + cov.T)
        dim = size
    return Instance(name=name, dim=int(dim), prior=pw, seed=int(seed),
                    points=points, covariance=cov)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "name": inst.name,
        "dim": inst.dim,
        "points": None if inst.points is None else inst.points.tolist(),
        "covariance": None if inst.covariance is None else inst.covariance.tolist(),
        "prior": inst.prior.tolist(),
        "seed": inst.seed,
    }


def instance_json(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True)


def save_instance(inst: Instance, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(instance_json(inst))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write instance file: {exc}") from exc


def instance_from_dict(d: dict) -> Instance:
    try:
        points = d["points"]
        cov = d["covariance"]
        inst = Instance(
            name=str(d["name"]),
            dim=int(d["dim"]),
            prior=np.asarray(d["prior"], dtype=float),
            seed=int(d["seed"]),
            points=None if points is None else np.asarray(points, dtype=float),
            covariance=None if cov is None else np.asarray(cov, dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadParams(f"malformed instance record: {exc}") from exc
    return inst


def load_instance(path: str) -> Instance:
    if not os.path.exists(path):
        raise IoError(f"no such instance file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot read instance file: {exc}") from exc
    return instance_from_dict(d)
