"""Kinematic-tree robot models.

A :class:`RobotDescription` is the editable link/joint graph (what a URDF
contains). :func:`build_model` turns it into an immutable :class:`RobotModel`
whose moving joints are topologically ordered, whose fixed joints have been
fused away, and which carries the precomputed ancestor mask ``U``.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import ModelError
from .spatial import SpatialTransform, inertia_from_params, transform_inertia

__all__ = [
    "JointType",
    "LinkSpec",
    "JointSpec",
    "FrameSpec",
    "RobotDescription",
    "ModelBuilder",
    "Frame",
    "RobotModel",
    "build_ancestor_mask",
    "build_model",
    "floating_base",
]


class JointType(enum.IntEnum):
    REVOLUTE = 0
    PRISMATIC = 1
    FIXED = 2

    @classmethod
    def parse(cls, text: str) -> "JointType":
        key = text.lower()
        if key in ("revolute", "continuous"):
            return cls.REVOLUTE
        if key == "prismatic":
            return cls.PRISMATIC
        if key == "fixed":
            return cls.FIXED
        raise ModelError(f"unknown joint type {text!r}")


@dataclass
class LinkSpec:
    name: str
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # about the CoM, in link axes
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    has_inertial: bool = True

    def spatial_inertia(self):
        return inertia_from_params(self.mass, self.com, self.inertia)


@dataclass
class JointSpec:
    name: str
    type: JointType
    parent: str
    child: str
    origin: SpatialTransform = field(default_factory=SpatialTransform.identity)
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    limits: Mapping[str, float] | None = None
    type_name: str | None = None  # original spelling, e.g. "continuous"


@dataclass
class FrameSpec:
    """Extra named frame rigidly attached to ``link`` at ``offset``."""

    name: str
    link: str
    offset: SpatialTransform = field(default_factory=SpatialTransform.identity)


@dataclass
class RobotDescription:
    name: str = "robot"
    links: list[LinkSpec] = field(default_factory=list)
    joints: list[JointSpec] = field(default_factory=list)
    frames: list[FrameSpec] = field(default_factory=list)

    def link(self, name):
        for link in self.links:
            if link.name == name:
                return link
        raise KeyError(name)


class ModelBuilder:
    """Programmatic construction of a :class:`RobotDescription`.

    >>> b = ModelBuilder("pendulum")
    >>> _ = b.add_link("base").add_link("arm", mass=1.0, com=[1, 0, 0])
    >>> _ = b.add_joint("hinge", "revolute", "base", "arm", axis=[0, 0, 1])
    >>> b.build().n_dof
    1
    """

    def __init__(self, name="robot"):
        self.description = RobotDescription(name=name)

    def add_link(self, name, mass=0.0, com=(0.0, 0.0, 0.0), inertia=None):
        inertia = np.zeros((3, 3)) if inertia is None else np.asarray(inertia, dtype=float)
        self.description.links.append(
            LinkSpec(name, float(mass), np.asarray(com, dtype=float), inertia)
        )
        return self

    def add_joint(self, name, type, parent, child, origin=None, axis=(1.0, 0.0, 0.0),
                  xyz=None, rotation=None, limits=None):
        if origin is None:
            rot = np.eye(3) if rotation is None else rotation
            pos = np.zeros(3) if xyz is None else xyz
            origin = SpatialTransform.checked(rot, pos)
        jtype = JointType.parse(type) if isinstance(type, str) else JointType(type)
        self.description.joints.append(
            JointSpec(name, jtype, parent, child, origin, np.asarray(axis, dtype=float),
                      limits, type if isinstance(type, str) else None)
        )
        return self

    def add_frame(self, name, link, offset=None):
        self.description.frames.append(
            FrameSpec(name, link, offset or SpatialTransform.identity())
        )
        return self

    def build(self, dtype=np.float64):
        return build_model(self.description, dtype=dtype)


def build_ancestor_mask(parents: Sequence[int], dtype=np.float64) -> np.ndarray:
    """Lower-triangular mask with ``U[i, j] = 1`` iff ``j`` is ``i`` or an ancestor of ``i``.

    ``parents[i] == -1`` marks a child of the virtual root. Parents must
    precede children (topological order); anything else is rejected.
    """
    parents = [int(p) for p in parents]
    n = len(parents)
    U = np.zeros((n, n), dtype=dtype)
    for i, p in enumerate(parents):
        if p < -1 or p >= i:
            raise ModelError(
                f"joint {i} has parent {p}: parents must be -1 or an earlier index"
            )
        U[i, i] = 1.0
        if p >= 0:
            U[i] += U[p]
    return U


@dataclass(frozen=True)
class Frame:
    """Named frame rigidly attached to moving joint ``joint`` (-1 = root)."""

    name: str
    joint: int
    offset: SpatialTransform


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joint_names: tuple
    parents: np.ndarray
    joint_types: np.ndarray
    axes: np.ndarray
    fixed_rotations: np.ndarray
    fixed_translations: np.ndarray
    inertias: np.ndarray
    ancestor_mask: np.ndarray
    max_depth: int
    frames: Mapping[str, Frame]
    limits: Mapping[str, Mapping[str, float]]
    diagnostics: tuple
    description: RobotDescription | None = None

    @property
    def n_dof(self) -> int:
        return len(self.joint_names)

    @property
    def dtype(self):
        return self.inertias.dtype

    @property
    def is_serial_chain(self) -> bool:
        return bool(np.all(self.parents == np.arange(self.n_dof) - 1))

    @property
    def total_mass(self) -> float:
        return float(self.inertias[:, 5, 5].sum()) if self.n_dof else 0.0

    @functools.cached_property
    def descendant_mask(self) -> np.ndarray:
        """``Uᵀ`` as a contiguous read-only array (subtree sums are ``Uᵀ X``)."""
        return _frozen(np.ascontiguousarray(self.ancestor_mask.T))

    @property
    def motion_subspaces(self) -> np.ndarray:
        """Local joint axes as spatial motion vectors, shape ``(n, 6)``."""
        rev = (self.joint_types == JointType.REVOLUTE)[:, None]
        return np.concatenate([self.axes * rev, self.axes * ~rev], axis=1)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def children(self, i: int) -> list:
        return [int(j) for j in np.flatnonzero(self.parents == i)]

    def astype(self, dtype) -> "RobotModel":
        """Copy of the model with all real arrays cast to ``dtype``."""
        cast = {
            k: _frozen(np.asarray(getattr(self, k), dtype=dtype))
            for k in ("axes", "fixed_rotations", "fixed_translations", "inertias", "ancestor_mask")
        }
        return RobotModel(
            name=self.name, joint_names=self.joint_names, parents=self.parents,
            joint_types=self.joint_types, max_depth=self.max_depth, frames=self.frames,
            limits=self.limits, diagnostics=self.diagnostics, description=self.description,
            **cast,
        )


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _unit_axis(axis, joint_name):
    axis = np.asarray(axis, dtype=float).reshape(3)
    norm = np.linalg.norm(axis)
    if not np.isfinite(norm) or norm < 1e-12:
        raise ModelError(f"joint {joint_name!r} has a zero or non-finite axis")
    return axis / norm


def build_model(description: RobotDescription, dtype=np.float64) -> RobotModel:
    """Validate a description and compile it into a :class:`RobotModel`.

    Moving joints are numbered by a depth-first traversal from the root
    visiting sibling joints in name order, so the numbering does not depend
    on the order joints were listed in.
    """
    links = {}
    for link in description.links:
        if link.name in links:
            raise ModelError(f"repeated link name {link.name!r}")
        links[link.name] = link
    joint_names = set()
    child_joints = {name: [] for name in links}
    parent_joint = {}
    for joint in description.joints:
        if joint.name in joint_names:
            raise ModelError(f"repeated joint name {joint.name!r}")
        joint_names.add(joint.name)
        for end in (joint.parent, joint.child):
            if end not in links:
                raise ModelError(f"joint {joint.name!r} references unknown link {end!r}")
        if joint.child in parent_joint:
            raise ModelError(
                f"link {joint.child!r} has two parent joints "
                f"({parent_joint[joint.child].name!r}, {joint.name!r})"
            )
        parent_joint[joint.child] = joint
        child_joints[joint.parent].append(joint)
    if not links:
        raise ModelError("description has no links")

    roots = [name for name in links if name not in parent_joint]
    if not roots:
        raise ModelError("joint graph has a cycle: no root link")
    if len(roots) > 1:
        raise ModelError(f"disconnected description: multiple root links {sorted(roots)}")
    root = roots[0]

    # link -> (moving joint index or -1, pose of link in that joint's frame)
    placement = {root: (-1, SpatialTransform.identity())}
    order = []  # (joint spec, parent index, fixed offset)

    def by_name(joints):
        return sorted(joints, key=lambda j: j.name, reverse=True)

    stack = [(j, -1, placement[root][1]) for j in by_name(child_joints[root])]
    while stack:
        joint, body, offset = stack.pop()
        pose = offset.compose(joint.origin)
        if joint.type == JointType.FIXED:
            placement[joint.child] = (body, pose)
        else:
            order.append((joint, body, pose))
            placement[joint.child] = (len(order) - 1, SpatialTransform.identity())
        child_body, child_offset = placement[joint.child]
        stack.extend((j, child_body, child_offset) for j in by_name(child_joints[joint.child]))
    missing = set(links) - set(placement)
    if missing:
        raise ModelError(
            f"links not reachable from root {root!r} (cycle or disconnected): {sorted(missing)}"
        )
    return _assemble(description, links, root, placement, order, child_joints, dtype)


def _assemble(description, links, root, placement, order, child_joints, dtype):
    n = len(order)
    parents = np.array([p for _, p, _ in order], dtype=np.int64)
    names = tuple(j.name for j, _, _ in order)
    types = np.array([int(j.type) for j, _, _ in order], dtype=np.int64)
    axes = np.array([_unit_axis(j.axis, j.name) for j, _, _ in order]).reshape(n, 3)
    frot = np.array([pose.rotation for _, _, pose in order]).reshape(n, 3, 3)
    ftrans = np.array([pose.translation for _, _, pose in order]).reshape(n, 3)

    inertias = np.zeros((n, 6, 6))
    body_mass = np.zeros(n)
    diagnostics = []
    for lname, (body, pose) in placement.items():
        if body < 0:
            continue
        link = links[lname]
        inertias[body] += transform_inertia(pose, link.spatial_inertia())
        body_mass[body] += link.mass
    for i in range(n):
        has_moving_child = bool(np.any(parents == i))
        if body_mass[i] <= 0.0 and has_moving_child:
            diagnostics.append(
                f"zero-mass body at joint {names[i]!r} carries moving descendants"
            )

    frames = {}
    for lname, (body, pose) in placement.items():
        frames[lname] = Frame(lname, int(body), pose)
    for joint, _, _ in order:
        frames.setdefault(joint.name, frames[joint.child])
    for joint in description.joints:
        if joint.type == JointType.FIXED:
            frames.setdefault(joint.name, frames[joint.child])
    for spec in description.frames:
        if spec.link not in frames:
            raise ModelError(f"frame {spec.name!r} attached to unknown link {spec.link!r}")
        if spec.name in links:
            raise ModelError(f"frame name {spec.name!r} collides with a link name")
        base = frames[spec.link]
        frames[spec.name] = Frame(spec.name, base.joint, base.offset.compose(spec.offset))

    limits = {j.name: dict(j.limits) for j, _, _ in order if j.limits}
    U = build_ancestor_mask(parents, dtype=dtype)
    return RobotModel(
        name=description.name,
        joint_names=names,
        parents=_frozen(parents),
        joint_types=_frozen(types),
        axes=_frozen(axes.astype(dtype)),
        fixed_rotations=_frozen(frot.astype(dtype)),
        fixed_translations=_frozen(ftrans.astype(dtype)),
        inertias=_frozen(inertias.astype(dtype)),
        ancestor_mask=_frozen(U),
        max_depth=int(U.sum(axis=1).max()) if n else 0,
        frames=MappingProxyType(frames),
        limits=MappingProxyType(limits),
        diagnostics=tuple(diagnostics),
        description=description,
    )


FLOATING_PREFIX = "floating_base"


def floating_base(model: RobotModel) -> RobotModel:
    """Mount ``model`` on six single-DOF joints emulating a free base.

    The stack is prismatic x, y, z followed by revolute z, y, x (Euler
    angles), so the usual Euler-angle singularity at pitch ±π/2 applies.
    """
    desc = model.description
    if desc is None:
        raise ModelError("model has no description to rebuild from")
    roots = {l.name for l in desc.links} - {j.child for j in desc.joints}
    (root,) = roots
    names = [f"{FLOATING_PREFIX}_{tag}" for tag in ("world", "px", "py", "pz", "rz", "ry")]
    taken = {l.name for l in desc.links} | {j.name for j in desc.joints}
    if taken & set(names) or f"{FLOATING_PREFIX}_rx" in taken:
        raise ModelError("description already uses floating-base names")
    links = [LinkSpec(name, has_inertial=False) for name in names] + list(desc.links)
    steps = [
        ("px", JointType.PRISMATIC, (1, 0, 0)),
        ("py", JointType.PRISMATIC, (0, 1, 0)),
        ("pz", JointType.PRISMATIC, (0, 0, 1)),
        ("rz", JointType.REVOLUTE, (0, 0, 1)),
        ("ry", JointType.REVOLUTE, (0, 1, 0)),
        ("rx", JointType.REVOLUTE, (1, 0, 0)),
    ]
    chain = names + [root]
    joints = []
    for k, (tag, jtype, axis) in enumerate(steps):
        joints.append(JointSpec(f"{FLOATING_PREFIX}_{tag}", jtype, chain[k], chain[k + 1],
                                SpatialTransform.identity(), np.array(axis, dtype=float)))
    new = RobotDescription(desc.name, links, joints + list(desc.joints), list(desc.frames))
    return build_model(new, dtype=model.dtype)
