"""Independent reference computations used by the tests.

Nothing here imports the library's spatial algebra, kinematics or dynamics:
the oracles work on the raw (unfused) link/joint description with 4×4
homogeneous matrices, scipy rotations and per-link point/CoM Jacobians.
"""
import numpy as np
from scipy.spatial.transform import Rotation

GRAVITY = np.array([0.0, 0.0, -9.81])


def hat(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def crm6(v):
    """Dense motion cross-product operator ``[ω̂ 0; v̂ ω̂]``."""
    out = np.zeros((6, 6))
    out[:3, :3] = hat(v[:3])
    out[3:, 3:] = hat(v[:3])
    out[3:, :3] = hat(v[3:])
    return out


def crf6(v):
    return -crm6(v).T


def motion_matrix(R, p):
    """6×6 Plücker matrix taking B-coordinates motion to A (pose of B in A = (R, p))."""
    X = np.zeros((6, 6))
    X[:3, :3] = R
    X[3:, 3:] = R
    X[3:, :3] = hat(p) @ R
    return X


def force_matrix(R, p):
    return np.linalg.inv(motion_matrix(R, p)).T


def homogeneous(R, p):
    H = np.eye(4)
    H[:3, :3] = R
    H[:3, 3] = p
    return H


def _joint_motion(joint, value):
    axis = np.asarray(joint.axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if joint.type_name in ("revolute", "continuous") or joint.type.name == "REVOLUTE":
        return homogeneous(Rotation.from_rotvec(axis * value).as_matrix(), np.zeros(3))
    if joint.type.name == "PRISMATIC":
        return homogeneous(np.eye(3), axis * value)
    return np.eye(4)


class TreeOracle:
    """Kinematics and dynamics recomputed from a model's raw description."""

    def __init__(self, model):
        desc = model.description
        self.model = model
        self.links = {l.name: l for l in desc.links}
        self.joints = list(desc.joints)
        self.by_child = {j.child: j for j in self.joints}
        children = {j.child for j in self.joints}
        (self.root,) = [l.name for l in desc.links if l.name not in children]
        self.index = {name: i for i, name in enumerate(model.joint_names)}

    def _is_moving(self, joint):
        return joint.type.name != "FIXED"

    def link_poses(self, q):
        poses = {self.root: np.eye(4)}
        pending = list(self.joints)
        while pending:
            rest = []
            for j in pending:
                if j.parent in poses:
                    value = q[self.index[j.name]] if self._is_moving(j) else 0.0
                    origin = homogeneous(j.origin.rotation, j.origin.translation)
                    poses[j.child] = poses[j.parent] @ origin @ _joint_motion(j, value)
                else:
                    rest.append(j)
            assert len(rest) < len(pending), "description is not a tree"
            pending = rest
        return poses

    def joint_frames(self, q):
        """World 4×4 pose of each moving joint frame, in model order."""
        poses = self.link_poses(q)
        out = [None] * self.model.n_dof
        for j in self.joints:
            if self._is_moving(j):
                out[self.index[j.name]] = poses[j.child]
        return out

    def _axes(self, q):
        """World origin and unit axis of every moving joint, in model order."""
        frames = self.joint_frames(q)
        origins, axes = [], []
        for k, name in enumerate(self.model.joint_names):
            joint = next(j for j in self.joints if j.name == name)
            a = np.asarray(joint.axis, float)
            a = a / np.linalg.norm(a)
            origins.append(frames[k][:3, 3])
            axes.append(frames[k][:3, :3] @ a)
        return np.array(origins), np.array(axes)

    def _ancestors(self, link):
        out = []
        while link in self.by_child:
            j = self.by_child[link]
            if self._is_moving(j):
                out.append(self.index[j.name])
            link = j.parent
        return out

    def point_jacobian(self, q, link, point_world, origins=None, axes=None):
        """6×n Jacobian ``[ω; ṗ]`` of a point rigidly attached to ``link``."""
        if origins is None:
            origins, axes = self._axes(q)
        n = self.model.n_dof
        J = np.zeros((6, n))
        for k in self._ancestors(link):
            joint = next(j for j in self.joints if j.name == self.model.joint_names[k])
            if joint.type.name == "REVOLUTE":
                J[:3, k] = axes[k]
                J[3:, k] = np.cross(axes[k], point_world - origins[k])
            else:
                J[3:, k] = axes[k]
        return J

    def spatial_axes(self, q):
        """Root-origin spatial axes ``[a; o × a]`` / ``[0; a]``, shape (n, 6)."""
        origins, axes = self._axes(q)
        S = np.zeros((self.model.n_dof, 6))
        for k, name in enumerate(self.model.joint_names):
            joint = next(j for j in self.joints if j.name == name)
            if joint.type.name == "REVOLUTE":
                S[k, :3] = axes[k]
                S[k, 3:] = np.cross(origins[k], axes[k])
            else:
                S[k, 3:] = axes[k]
        return S

    def mass_matrix(self, q):
        poses = self.link_poses(q)
        origins, axes = self._axes(q)
        n = self.model.n_dof
        M = np.zeros((n, n))
        for name, link in self.links.items():
            if link.mass == 0.0 and not np.any(link.inertia):
                continue
            T = poses[name]
            com = T[:3, :3] @ link.com + T[:3, 3]
            J = self.point_jacobian(q, name, com, origins, axes)
            Iw = T[:3, :3] @ link.inertia @ T[:3, :3].T
            M += link.mass * J[3:].T @ J[3:] + J[:3].T @ Iw @ J[:3]
        return M

    def gravity(self, q, gravity=GRAVITY):
        poses = self.link_poses(q)
        origins, axes = self._axes(q)
        g = np.zeros(self.model.n_dof)
        for name, link in self.links.items():
            if link.mass == 0.0:
                continue
            T = poses[name]
            com = T[:3, :3] @ link.com + T[:3, 3]
            J = self.point_jacobian(q, name, com, origins, axes)
            g -= link.mass * J[3:].T @ gravity
        return g

    def coriolis(self, q, qd, h=1e-6):
        """``c_i = Σ_jk (∂M_ij/∂q_k - ½ ∂M_jk/∂q_i) q̇_j q̇_k`` with central differences."""
        n = self.model.n_dof
        dM = np.zeros((n, n, n))  # dM[k] = ∂M/∂q_k
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            dM[k] = (self.mass_matrix(q + e) - self.mass_matrix(q - e)) / (2 * h)
        Mdot = np.einsum("kij,k->ij", dM, qd)
        quad = np.einsum("ijk,j,k->i", dM, qd, qd)
        return Mdot @ qd - 0.5 * quad

    def total_mass(self):
        return sum(l.mass for l in self.links.values())


def naive_chain_fk(fixed_transforms, axes, q):
    """Serial chain product of 4×4 matrices: ∏ origin_i · Rot(axis_i, q_i)."""
    H = np.eye(4)
    out = []
    for (R, p), a, qi in zip(fixed_transforms, axes, q):
        H = H @ homogeneous(R, p) @ homogeneous(Rotation.from_rotvec(a * qi).as_matrix(), np.zeros(3))
        out.append(H.copy())
    return out


def rel_err(a, b):
    """Norm-wise relative error ``‖a - b‖∞ / max(‖b‖∞, tiny)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(b)) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b)) / scale) if a.size else 0.0
