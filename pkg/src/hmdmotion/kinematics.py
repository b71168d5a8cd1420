"""Rotation representations, rigid transforms and forward kinematics.

All functions are pure, operate on torch tensors of any floating dtype and
accept arbitrary leading batch dimensions. Rotations live in SO(3) as 3x3
matrices internally; axis-angle and the continuous 6D encoding are the two
interchange formats. The kinematic skeleton is a plain tree of rest offsets
that stands in for a full parametric body model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import torch
from torch import Tensor

from .errors import DegenerateInput, ShapeMismatch

PART_LABELS = ("head", "left_hand", "right_hand", "upper_body", "lower_body")

# ---------------------------------------------------------------------------
# rotation conversions
# ---------------------------------------------------------------------------


def hat(v: Tensor) -> Tensor:
    """Skew-symmetric matrix of a (...,3) vector."""
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    zero = torch.zeros_like(x)
    rows = [
        torch.stack([zero, -z, y], dim=-1),
        torch.stack([z, zero, -x], dim=-1),
        torch.stack([-y, x, zero], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def aa_to_matrix(aa: Tensor) -> Tensor:
    """Rodrigues' formula, (...,3) axis-angle -> (...,3,3) rotation.

    Differentiable everywhere; the zero rotation maps to the identity via a
    Taylor branch of sin(t)/t and (1-cos t)/t^2.
    """
    angle = torch.linalg.norm(aa, dim=-1)
    small = angle < 1e-6
    safe = torch.where(small, torch.ones_like(angle), angle)
    a2 = angle * angle
    sin_t = torch.where(small, 1.0 - a2 / 6.0, torch.sin(safe) / safe)
    cos_t = torch.where(small, 0.5 - a2 / 24.0, (1.0 - torch.cos(safe)) / (safe * safe))
    k = hat(aa)
    eye = torch.eye(3, dtype=aa.dtype, device=aa.device).expand(k.shape)
    return eye + sin_t[..., None, None] * k + cos_t[..., None, None] * (k @ k)


def matrix_to_quat(m: Tensor) -> Tensor:
    """(...,3,3) rotation -> (...,4) unit quaternion (w, x, y, z), w >= 0.

    Branches on the largest diagonal combination so every rotation, including
    half-turns, converts stably.
    """
    m00, m11, m22 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    tr = m00 + m11 + m22
    one = torch.ones_like(tr)

    def _norm4(a, b, c, d):
        return torch.stack([a, b, c, d], dim=-1)

    # four candidate constructions, each stable on its own branch
    qw = torch.sqrt(torch.clamp(one + tr, min=0.0) + 1e-30)
    cand_w = _norm4(
        qw,
        (m[..., 2, 1] - m[..., 1, 2]) / qw,
        (m[..., 0, 2] - m[..., 2, 0]) / qw,
        (m[..., 1, 0] - m[..., 0, 1]) / qw,
    )
    qx = torch.sqrt(torch.clamp(one + m00 - m11 - m22, min=0.0) + 1e-30)
    cand_x = _norm4(
        (m[..., 2, 1] - m[..., 1, 2]) / qx,
        qx,
        (m[..., 1, 0] + m[..., 0, 1]) / qx,
        (m[..., 0, 2] + m[..., 2, 0]) / qx,
    )
    qy = torch.sqrt(torch.clamp(one - m00 + m11 - m22, min=0.0) + 1e-30)
    cand_y = _norm4(
        (m[..., 0, 2] - m[..., 2, 0]) / qy,
        (m[..., 1, 0] + m[..., 0, 1]) / qy,
        qy,
        (m[..., 2, 1] + m[..., 1, 2]) / qy,
    )
    qz = torch.sqrt(torch.clamp(one - m00 - m11 + m22, min=0.0) + 1e-30)
    cand_z = _norm4(
        (m[..., 1, 0] - m[..., 0, 1]) / qz,
        (m[..., 0, 2] + m[..., 2, 0]) / qz,
        (m[..., 2, 1] + m[..., 1, 2]) / qz,
        qz,
    )

    scores = torch.stack([tr, m00, m11, m22], dim=-1)
    choice = torch.argmax(scores, dim=-1)
    cands = torch.stack([cand_w, cand_x, cand_y, cand_z], dim=-2)
    quat = torch.gather(
        cands, -2, choice[..., None, None].expand(*choice.shape, 1, 4)
    ).squeeze(-2)
    quat = quat / torch.linalg.norm(quat, dim=-1, keepdim=True)
    # fix sign so w >= 0, which pins the angle to [0, pi]
    sign = torch.where(quat[..., :1] < 0, -torch.ones_like(quat[..., :1]), torch.ones_like(quat[..., :1]))
    return quat * sign


def quat_to_aa(q: Tensor) -> Tensor:
    """(...,4) unit quaternion (w,x,y,z) -> (...,3) axis-angle, angle in [0, pi]."""
    w = torch.clamp(q[..., 0], -1.0, 1.0)
    v = q[..., 1:]
    vnorm = torch.linalg.norm(v, dim=-1)
    angle = 2.0 * torch.atan2(vnorm, w)
    small = vnorm < 1e-12
    scale = torch.where(small, 2.0 * torch.ones_like(vnorm), angle / torch.where(small, torch.ones_like(vnorm), vnorm))
    return v * scale[..., None]


def matrix_to_aa(m: Tensor) -> Tensor:
    """(...,3,3) rotation -> (...,3) axis-angle with canonical angle in [0, pi]."""
    return quat_to_aa(matrix_to_quat(m))


def canonicalize_aa(aa: Tensor) -> Tensor:
    """Wrap an axis-angle vector so its magnitude lies in [0, pi]."""
    angle = torch.linalg.norm(aa, dim=-1)
    small = angle < 1e-12
    safe = torch.where(small, torch.ones_like(angle), angle)
    wrapped = torch.remainder(angle, 2.0 * torch.pi)
    flip = wrapped > torch.pi
    canon = torch.where(flip, 2.0 * torch.pi - wrapped, wrapped)
    sign = torch.where(flip, -torch.ones_like(canon), torch.ones_like(canon))
    return aa * (sign * canon / safe)[..., None]


def rot6d_decode(r6: Tensor) -> Tensor:
    """Gram-Schmidt decode of the 6D encoding, (...,6) -> (...,3,3).

    The 6 numbers are the first two columns of the target matrix; the result
    is orthonormal with det +1 for any input whose normalization denominators
    stay above 1e-8.
    """
    a1, a2 = r6[..., :3], r6[..., 3:]
    n1 = torch.linalg.norm(a1, dim=-1, keepdim=True)
    if bool((n1 < 1e-8).any()):
        raise DegenerateInput("first 6D column has near-zero norm")
    b1 = a1 / n1
    proj = (b1 * a2).sum(-1, keepdim=True)
    res = a2 - proj * b1
    n2 = torch.linalg.norm(res, dim=-1, keepdim=True)
    if bool((n2 < 1e-8).any()):
        raise DegenerateInput("second 6D column is parallel to the first")
    b2 = res / n2
    b3 = torch.cross(b1, b2, dim=-1)
    return torch.stack([b1, b2, b3], dim=-1)


def rot6d_encode(m: Tensor) -> Tensor:
    """First two columns of a rotation matrix, (...,3,3) -> (...,6)."""
    return torch.cat([m[..., :, 0], m[..., :, 1]], dim=-1)


def geodesic_delta(prev: Tensor, cur: Tensor) -> Tensor:
    """Relative rotation carrying prev onto cur: prev^-1 @ cur."""
    return prev.transpose(-1, -2) @ cur


def rotation_angle(m: Tensor) -> Tensor:
    """Geodesic angle of a rotation matrix, (...,3,3) -> (...,), in [0, pi].

    atan2 form; differentiable except exactly at angle pi.
    """
    s = torch.stack(
        [
            m[..., 2, 1] - m[..., 1, 2],
            m[..., 0, 2] - m[..., 2, 0],
            m[..., 1, 0] - m[..., 0, 1],
        ],
        dim=-1,
    ) * 0.5
    sin_norm = torch.sqrt((s * s).sum(-1) + 1e-30)
    cos = (m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2] - 1.0) * 0.5
    return torch.atan2(sin_norm, cos)


# ---------------------------------------------------------------------------
# rigid transforms
# ---------------------------------------------------------------------------


@dataclass
class RigidTransform:
    """A world-frame rigid transform: x_world = rotation @ x_local + translation."""

    rotation: Tensor  # (3,3)
    translation: Tensor  # (3,)

    @staticmethod
    def identity(dtype=torch.float64) -> "RigidTransform":
        return RigidTransform(torch.eye(3, dtype=dtype), torch.zeros(3, dtype=dtype))

    def apply(self, point: Tensor) -> Tensor:
        return self.rotation @ point + self.translation

    def clone(self) -> "RigidTransform":
        return RigidTransform(self.rotation.clone(), self.translation.clone())


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """a then b in a's frame: result maps x through b first, then a."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: RigidTransform) -> RigidTransform:
    rt = a.rotation.transpose(-1, -2)
    return RigidTransform(rt, -(rt @ a.translation))


# ---------------------------------------------------------------------------
# skeleton
# ---------------------------------------------------------------------------


@dataclass
class SkeletonSpec:
    """Kinematic tree: parent indices, rest offsets (child in parent frame) and
    per-joint body-part labels.

    Joints must be in topological order (parent index < joint index, root at 0
    with parent -1); exactly one joint each is labeled head / left_hand /
    right_hand, and those three count as upper body.
    """

    names: list[str]
    parent: np.ndarray  # (J,) int
    rest_offset: Tensor  # (J,3) float64, meters
    part_label: list[str]

    def __post_init__(self):
        j = len(self.names)
        self.parent = np.asarray(self.parent, dtype=np.int64)
        if not torch.is_tensor(self.rest_offset):
            self.rest_offset = torch.as_tensor(np.asarray(self.rest_offset, dtype=np.float64))
        self.rest_offset = self.rest_offset.to(torch.float64)
        if self.parent.shape != (j,) or self.rest_offset.shape != (j, 3) or len(self.part_label) != j:
            raise ShapeMismatch("names/parent/rest_offset/part_label lengths disagree")
        if j < 1 or self.parent[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for i in range(1, j):
            if not 0 <= self.parent[i] < i:
                raise ValueError(f"joint {i} parent {self.parent[i]} breaks topological order")
        for lbl in self.part_label:
            if lbl not in PART_LABELS:
                raise ValueError(f"unknown part label {lbl!r}")
        for unique in ("head", "left_hand", "right_hand"):
            if self.part_label.count(unique) != 1:
                raise ValueError(f"exactly one joint must be labeled {unique!r}")
        if not torch.isfinite(self.rest_offset).all():
            raise ValueError("rest offsets must be finite")

    @property
    def joint_count(self) -> int:
        return len(self.names)

    @property
    def head_index(self) -> int:
        return self.part_label.index("head")

    @property
    def left_hand_index(self) -> int:
        return self.part_label.index("left_hand")

    @property
    def right_hand_index(self) -> int:
        return self.part_label.index("right_hand")

    def part_indices(self, part: str) -> np.ndarray:
        """Joint index array for one of: full, upper, lower, head_hands, or a raw label."""
        if part == "full":
            return np.arange(self.joint_count)
        if part == "upper":
            keep = {"upper_body", "head", "left_hand", "right_hand"}
            return np.array([i for i, l in enumerate(self.part_label) if l in keep])
        if part == "lower":
            return np.array([i for i, l in enumerate(self.part_label) if l == "lower_body"])
        if part == "head_hands":
            return np.array([self.head_index, self.left_hand_index, self.right_hand_index])
        return np.array([i for i, l in enumerate(self.part_label) if l == part])

    def to_dict(self) -> dict:
        return {
            "joints": [
                {
                    "name": self.names[i],
                    "parent": int(self.parent[i]),
                    "offset": [float(x) for x in self.rest_offset[i]],
                    "part": self.part_label[i],
                }
                for i in range(self.joint_count)
            ]
        }

    @staticmethod
    def from_dict(data: dict) -> "SkeletonSpec":
        try:
            joints = data["joints"]
            names = [j["name"] for j in joints]
            parent = np.array([j["parent"] for j in joints], dtype=np.int64)
            offset = np.array([j["offset"] for j in joints], dtype=np.float64)
            part = [j["part"] for j in joints]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed skeleton spec: missing {exc}") from exc
        return SkeletonSpec(names, parent, torch.as_tensor(offset), part)

    @staticmethod
    def from_file(path) -> "SkeletonSpec":
        with open(path) as fh:
            return SkeletonSpec.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def default_skeleton() -> SkeletonSpec:
    """The packaged 22-joint body skeleton (y-up, meters, facing +z)."""
    text = resources.files("hmdmotion").joinpath("data/skeleton_22.json").read_text()
    return SkeletonSpec.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# body pose and forward kinematics
# ---------------------------------------------------------------------------


@dataclass
class BodyPose:
    """Joint rotations (axis-angle, entry 0 is the global root orientation)
    plus the world-space root position."""

    theta: Tensor  # (J,3)
    gamma: Tensor  # (3,)


@dataclass
class PoseSE3:
    """World-frame transform of every joint."""

    rotations: Tensor  # (...,J,3,3)
    positions: Tensor  # (...,J,3)

    def joint(self, index: int) -> RigidTransform:
        return RigidTransform(self.rotations[..., index, :, :], self.positions[..., index, :])


def forward_kinematics(skel: SkeletonSpec, theta: Tensor, gamma: Tensor) -> PoseSE3:
    """Pose parameters -> world-frame joint transforms.

    theta: (...,J,3) axis-angle, gamma: (...,3). The root world transform is
    (aa_to_matrix(theta[...,0,:]), gamma); children chain through rest offsets.
    """
    j = skel.joint_count
    if theta.shape[-2:] != (j, 3) or gamma.shape[-1] != 3 or theta.shape[:-2] != gamma.shape[:-1]:
        raise ShapeMismatch(
            f"theta {tuple(theta.shape)} / gamma {tuple(gamma.shape)} do not match J={j}"
        )
    local = aa_to_matrix(theta)  # (...,J,3,3)
    offsets = skel.rest_offset.to(dtype=theta.dtype, device=theta.device)
    rots = [local[..., 0, :, :]]
    poss = [gamma]
    for i in range(1, j):
        p = int(skel.parent[i])
        rots.append(rots[p] @ local[..., i, :, :])
        poss.append(poss[p] + (rots[p] @ offsets[i]))
    return PoseSE3(torch.stack(rots, dim=-3), torch.stack(poss, dim=-2))


def extract_hmd(skel: SkeletonSpec, pose: PoseSE3):
    """World transforms of the head, left-hand and right-hand joints."""
    return pose.joint(skel.head_index), pose.joint(skel.left_hand_index), pose.joint(skel.right_hand_index)
