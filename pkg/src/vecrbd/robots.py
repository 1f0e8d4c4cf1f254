"""Bundled robot models and random tree generators."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

from .model import ModelBuilder, RobotModel, floating_base
from .spatial import rotation_about_axis
from .urdf import parse_urdf

__all__ = ["asset_path", "chain7", "humanoid", "humanoid_floating", "load_builtin",
           "BUILTIN_MODELS", "random_tree", "random_chain"]


def asset_path(filename: str):
    return resources.files("vecrbd") / "assets" / filename


@lru_cache(maxsize=None)
def _description(filename):
    return parse_urdf(asset_path(filename).read_bytes())


def chain7(dtype=np.float64) -> RobotModel:
    """7-DOF serial arm with a fused hand; tool frame ``hand_tcp``."""
    return _description("chain7.urdf").build(dtype=dtype)


def humanoid(dtype=np.float64) -> RobotModel:
    """23-DOF humanoid with the pelvis fixed to the world."""
    return _description("humanoid23.urdf").build(dtype=dtype)


def humanoid_floating(dtype=np.float64) -> RobotModel:
    """The 23-DOF humanoid on a 6-joint floating base (29 DOF)."""
    return floating_base(humanoid(dtype))


BUILTIN_MODELS = {
    "chain7": chain7,
    "humanoid": humanoid,
    "humanoid_floating": humanoid_floating,
}


def load_builtin(name: str, dtype=np.float64) -> RobotModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    return factory(dtype)


def _random_rotation(rng):
    axis = rng.normal(size=3)
    return rotation_about_axis(axis / np.linalg.norm(axis), rng.uniform(-np.pi, np.pi))


def _random_inertia(rng):
    mass = rng.uniform(0.2, 3.0)
    # principal moments satisfying the triangle inequality
    moments = rng.uniform(0.01, 0.1, size=3)
    moments[2] = rng.uniform(abs(moments[0] - moments[1]) + 1e-3, moments[0] + moments[1])
    Q = _random_rotation(rng)
    return mass, rng.uniform(-0.1, 0.1, size=3), Q @ np.diag(moments) @ Q.T


def random_tree(n: int, seed=0, *, prismatic_fraction=0.2, branching=True,
                fixed_joints=0, dtype=np.float64) -> RobotModel:
    """Random tree of ``n`` moving joints with random poses, axes and inertias.

    ``fixed_joints`` extra massive links are attached through fixed joints so
    that fusion is exercised.
    """
    rng = np.random.default_rng(seed)
    b = ModelBuilder(f"random{n}_{seed}")
    b.add_link("base")
    names = ["base"]
    for i in range(n):
        parent = names[rng.integers(len(names))] if branching else names[-1]
        mass, com, inertia = _random_inertia(rng)
        child = f"l{i}"
        b.add_link(child, mass, com, inertia)
        kind = "prismatic" if rng.random() < prismatic_fraction else "revolute"
        axis = rng.normal(size=3)
        b.add_joint(f"j{i}", kind, parent, child, xyz=rng.uniform(-0.3, 0.3, size=3),
                    rotation=_random_rotation(rng), axis=axis / np.linalg.norm(axis))
        names.append(child)
    for k in range(fixed_joints):
        parent = names[rng.integers(len(names))]
        mass, com, inertia = _random_inertia(rng)
        b.add_link(f"f{k}", mass, com, inertia)
        b.add_joint(f"fix{k}", "fixed", parent, f"f{k}", xyz=rng.uniform(-0.3, 0.3, size=3),
                    rotation=_random_rotation(rng))
    return b.build(dtype=dtype)


def random_chain(n: int, seed=0, **kwargs) -> RobotModel:
    return random_tree(n, seed, branching=False, **kwargs)
