"""Parser for the URDF subset needed by the dynamics code.

Recognized: ``<link>/<inertial>`` (mass, origin, inertia), ``<joint>`` of type
revolute, continuous, prismatic or fixed with ``<origin>``, ``<axis>`` and
``<limit>``. Visual, collision, transmission, gazebo and other elements are
skipped and reported in :attr:`UrdfDocument.warnings`.
"""
from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelError, UnsupportedFeatureError, UrdfParseError
from .model import JointSpec, JointType, LinkSpec, RobotDescription, RobotModel, build_model
from .spatial import SpatialTransform

__all__ = ["UrdfDocument", "parse_urdf", "rpy_to_rotation", "rotation_to_rpy",
           "load_urdf", "to_urdf"]

_SUPPORTED_JOINTS = {"revolute", "continuous", "prismatic", "fixed"}
_UNSUPPORTED_JOINTS = {"planar", "floating"}
_SKIPPED_LINK_CHILDREN = {"visual", "collision"}


@dataclass
class UrdfDocument(RobotDescription):
    warnings: list[str] = field(default_factory=list)

    def build(self, dtype=np.float64) -> RobotModel:
        return build_model(self, dtype=dtype)


def rpy_to_rotation(roll, pitch, yaw):
    """Fixed-axis x-y-z rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def rotation_to_rpy(R):
    """Inverse of :func:`rpy_to_rotation` (pitch in [-π/2, π/2])."""
    R = np.asarray(R, dtype=float)
    pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    if abs(math.cos(pitch)) < 1e-12:
        # gimbal lock: fold yaw into roll
        return math.atan2(-R[1, 2], R[1, 1]), pitch, 0.0
    return math.atan2(R[2, 1], R[2, 2]), pitch, math.atan2(R[1, 0], R[0, 0])


def _floats(text, count, what):
    try:
        values = [float(x) for x in text.split()]
    except ValueError:
        raise ModelError(f"{what}: expected {count} numbers, got {text!r}") from None
    if len(values) != count:
        raise ModelError(f"{what}: expected {count} numbers, got {text!r}")
    return values


def _origin(elem, what):
    origin = elem.find("origin")
    if origin is None:
        return SpatialTransform.identity()
    xyz = _floats(origin.get("xyz", "0 0 0"), 3, f"{what} origin xyz")
    rpy = _floats(origin.get("rpy", "0 0 0"), 3, f"{what} origin rpy")
    return SpatialTransform(rpy_to_rotation(*rpy), np.array(xyz))


def _attr(elem, name, what):
    value = elem.get(name)
    if value is None:
        raise ModelError(f"{what} is missing attribute {name!r}")
    return value


def _parse_link(elem, warnings):
    name = _attr(elem, "name", "<link>")
    for child in elem:
        if child.tag in _SKIPPED_LINK_CHILDREN:
            warnings.append(f"link {name!r}: skipped <{child.tag}>")
        elif child.tag != "inertial":
            warnings.append(f"link {name!r}: unrecognized <{child.tag}> skipped")
    inertial = elem.find("inertial")
    if inertial is None:
        return LinkSpec(name, has_inertial=False)
    mass_elem = inertial.find("mass")
    mass = float(_attr(mass_elem, "value", f"link {name!r} <mass>")) if mass_elem is not None else 0.0
    pose = _origin(inertial, f"link {name!r} inertial")
    tensor = np.zeros((3, 3))
    inertia = inertial.find("inertia")
    if inertia is not None:
        get = {k: float(inertia.get(k, "0")) for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
        tensor = np.array([
            [get["ixx"], get["ixy"], get["ixz"]],
            [get["ixy"], get["iyy"], get["iyz"]],
            [get["ixz"], get["iyz"], get["izz"]],
        ])
    # inertia is given in the inertial frame; rotate into link axes
    tensor = pose.rotation @ tensor @ pose.rotation.T
    tensor = 0.5 * (tensor + tensor.T)
    if mass < 0.0:
        raise ModelError(f"link {name!r} has negative mass {mass}")
    return LinkSpec(name, mass, pose.translation.copy(), tensor, True)


def _parse_joint(elem, warnings):
    name = _attr(elem, "name", "<joint>")
    jtype = _attr(elem, "type", f"joint {name!r}")
    if jtype in _UNSUPPORTED_JOINTS:
        raise UnsupportedFeatureError(f"joint {name!r}: type {jtype!r} is not supported")
    if jtype not in _SUPPORTED_JOINTS:
        raise ModelError(f"joint {name!r}: unknown type {jtype!r}")
    parent = elem.find("parent")
    child = elem.find("child")
    if parent is None or child is None:
        raise ModelError(f"joint {name!r} needs <parent> and <child>")
    axis_elem = elem.find("axis")
    axis = np.array([1.0, 0.0, 0.0])
    if axis_elem is not None:
        axis = np.array(_floats(axis_elem.get("xyz", "1 0 0"), 3, f"joint {name!r} axis"))
    limits = None
    limit = elem.find("limit")
    if limit is not None:
        limits = {k: float(v) for k, v in limit.attrib.items()}
    for sub in elem:
        if sub.tag not in ("origin", "parent", "child", "axis", "limit"):
            warnings.append(f"joint {name!r}: unrecognized <{sub.tag}> skipped")
    return JointSpec(
        name=name,
        type=JointType.parse(jtype),
        parent=_attr(parent, "link", f"joint {name!r} <parent>"),
        child=_attr(child, "link", f"joint {name!r} <child>"),
        origin=_origin(elem, f"joint {name!r}"),
        axis=axis,
        limits=limits,
        type_name=jtype,
    )


def parse_urdf(text: str | bytes) -> UrdfDocument:
    """Parse URDF XML into a :class:`UrdfDocument`.

    Raises :class:`UrdfParseError` (with line/column) for malformed XML,
    :class:`UnsupportedFeatureError` for planar/floating joints and
    :class:`ModelError` for structural problems.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        reason = re.sub(r":? line \d+, column \d+$", "", str(exc))
        raise UrdfParseError(f"malformed URDF: {reason}", line, column) from None
    if root.tag != "robot":
        raise UrdfParseError(f"root element must be <robot>, found <{root.tag}>")
    warnings = []
    links, joints = [], []
    for elem in root:
        if elem.tag == "link":
            links.append(_parse_link(elem, warnings))
        elif elem.tag == "joint":
            joints.append(_parse_joint(elem, warnings))
        else:
            warnings.append(f"unrecognized <{elem.tag}> skipped")
    doc = UrdfDocument(name=root.get("name", "robot"), links=links, joints=joints,
                       warnings=warnings)
    _check_inertials(doc)
    return doc


def _check_inertials(doc: UrdfDocument):
    # a link that moves and drives further moving joints must declare its inertia
    moving_parent_of = {j.child: j for j in doc.joints}
    children = {}
    for j in doc.joints:
        children.setdefault(j.parent, []).append(j)
    links = {l.name: l for l in doc.links}
    for name, link in links.items():
        if link.has_inertial:
            continue
        has_moving_child = any(j.type != JointType.FIXED for j in children.get(name, []))
        if not has_moving_child:
            continue
        # walk to the root: only links carried by some moving joint matter
        cur, carried, seen = name, False, set()
        while cur in moving_parent_of and cur not in seen:
            seen.add(cur)
            joint = moving_parent_of[cur]
            if joint.type != JointType.FIXED:
                carried = True
                break
            cur = joint.parent
        if carried:
            raise ModelError(
                f"link {name!r} has no <inertial> but carries moving child joints"
            )


def load_urdf(path, dtype=np.float64) -> RobotModel:
    """Read a URDF file (UTF-8) and build the model."""
    text = Path(path).read_bytes()
    return parse_urdf(text).build(dtype=dtype)


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def to_urdf(doc: RobotDescription) -> str:
    """Serialize the recognized subset back to URDF text."""
    root = ET.Element("robot", name=doc.name)
    for link in doc.links:
        elem = ET.SubElement(root, "link", name=link.name)
        if not link.has_inertial:
            continue
        inertial = ET.SubElement(elem, "inertial")
        ET.SubElement(inertial, "origin", xyz=_fmt(link.com), rpy="0.0 0.0 0.0")
        ET.SubElement(inertial, "mass", value=repr(float(link.mass)))
        I = link.inertia
        ET.SubElement(inertial, "inertia", ixx=repr(float(I[0, 0])), ixy=repr(float(I[0, 1])),
                      ixz=repr(float(I[0, 2])), iyy=repr(float(I[1, 1])), iyz=repr(float(I[1, 2])),
                      izz=repr(float(I[2, 2])))
    for joint in doc.joints:
        type_name = joint.type_name or joint.type.name.lower()
        elem = ET.SubElement(root, "joint", name=joint.name, type=type_name)
        ET.SubElement(elem, "origin", xyz=_fmt(joint.origin.translation),
                      rpy=_fmt(rotation_to_rpy(joint.origin.rotation)))
        ET.SubElement(elem, "parent", link=joint.parent)
        ET.SubElement(elem, "child", link=joint.child)
        ET.SubElement(elem, "axis", xyz=_fmt(joint.axis))
        if joint.limits:
            ET.SubElement(elem, "limit", {k: repr(float(v)) for k, v in joint.limits.items()})
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")
