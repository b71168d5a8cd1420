"""Simulation of the sparse device signal from ground-truth motion.

Turns a motion sequence into the per-frame stream a head-mounted device would
deliver: head and hand world transforms, hands re-expressed in head space,
frame-to-frame velocities, and (in the hand-tracking scenario) per-hand
visibility decided by a camera frustum. Also provides deterministic synthetic
motions so everything can be exercised without any motion-capture assets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor

from .errors import EmptyInput, ShapeMismatch
from .kinematics import (
    RigidTransform,
    SkeletonSpec,
    compose,
    forward_kinematics,
    geodesic_delta,
    invert,
    rot6d_decode,
    rot6d_encode,
)

FEATURE_DIM = 92
STREAMS = ("h", "l", "r", "lh", "rh")

# joint indices of the packaged 22-joint skeleton, used by the synthetic
# motion generator
_L_HIP, _R_HIP, _L_KNEE, _R_KNEE = 1, 2, 4, 5
_SPINE1 = 3
_L_SHOULDER, _R_SHOULDER = 16, 17
_L_ELBOW, _R_ELBOW = 18, 19


@dataclass
class MotionSequence:
    """Ground-truth pose track: per-frame joint rotations and root positions."""

    theta: Tensor  # (T,J,3) axis-angle
    gamma: Tensor  # (T,3) meters
    fps: float

    def __post_init__(self):
        self.theta = torch.as_tensor(self.theta)
        self.gamma = torch.as_tensor(self.gamma)
        if self.theta.ndim != 3 or self.theta.shape[-1] != 3:
            raise ShapeMismatch(f"theta must be (T,J,3), got {tuple(self.theta.shape)}")
        if self.gamma.shape != (self.theta.shape[0], 3):
            raise ShapeMismatch(f"gamma must be (T,3), got {tuple(self.gamma.shape)}")
        if self.frames < 2:
            raise ValueError("a motion needs at least 2 frames")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if not (torch.isfinite(self.theta).all() and torch.isfinite(self.gamma).all()):
            raise ValueError("motion contains non-finite values")

    @property
    def frames(self) -> int:
        return self.theta.shape[0]

    @property
    def joint_count(self) -> int:
        return self.theta.shape[1]

    def slice(self, start: int, stop: int) -> "MotionSequence":
        return MotionSequence(self.theta[start:stop], self.gamma[start:stop], self.fps)


class ScenarioMode(str, enum.Enum):
    """Motion controllers (hands always tracked) vs camera hand tracking."""

    MC = "mc"
    HT = "ht"


def _pitch_down(degrees: float) -> RigidTransform:
    a = math.radians(degrees)
    rot = torch.tensor(
        [[1.0, 0.0, 0.0], [0.0, math.cos(a), -math.sin(a)], [0.0, math.sin(a), math.cos(a)]],
        dtype=torch.float64,
    )
    return RigidTransform(rot, torch.zeros(3, dtype=torch.float64))


@dataclass
class FrustumSpec:
    """Hand-tracking camera frustum: angular extents, depth range and the
    camera mount expressed in the head frame (+z forward, +y up)."""

    hfov: float = 75.0  # degrees
    vfov: float = 62.0
    near: float = 0.05  # meters
    far: float = 1.5
    mount: RigidTransform = field(default_factory=lambda: _pitch_down(10.0))

    def __post_init__(self):
        if not (0.0 < self.hfov < 180.0 and 0.0 < self.vfov < 180.0):
            raise ValueError("fov angles must be in (0, 180) degrees")
        if not 0.0 <= self.near < self.far:
            raise ValueError("need 0 <= near < far")

    def to_dict(self) -> dict:
        return {
            "hfov": self.hfov,
            "vfov": self.vfov,
            "near": self.near,
            "far": self.far,
            "mount_rotation": [float(x) for x in self.mount.rotation.flatten()],
            "mount_translation": [float(x) for x in self.mount.translation],
        }

    @staticmethod
    def from_dict(d: dict) -> "FrustumSpec":
        mount = RigidTransform(
            torch.tensor(d["mount_rotation"], dtype=torch.float64).reshape(3, 3),
            torch.tensor(d["mount_translation"], dtype=torch.float64),
        )
        return FrustumSpec(d["hfov"], d["vfov"], d["near"], d["far"], mount)


def default_frustum() -> FrustumSpec:
    return FrustumSpec()


@dataclass
class VelocityDelta:
    """Frame-to-frame change of a transform: geodesic rotation delta plus
    translation difference."""

    rotation: Tensor  # (3,3)
    translation: Tensor  # (3,)

    @staticmethod
    def zero(dtype=torch.float64) -> "VelocityDelta":
        return VelocityDelta(torch.eye(3, dtype=dtype), torch.zeros(3, dtype=dtype))


@dataclass
class HmdFrame:
    """One timestep of the device stream.

    Fields of an invisible hand hold identity/zero sentinels and must never be
    consumed downstream; consumers branch on nu_l / nu_r first.
    """

    x_h: RigidTransform
    x_l: RigidTransform
    x_r: RigidTransform
    x_lh: RigidTransform
    x_rh: RigidTransform
    v_h: VelocityDelta
    v_l: VelocityDelta
    v_r: VelocityDelta
    v_lh: VelocityDelta
    v_rh: VelocityDelta
    nu_l: int
    nu_r: int


def head_space(x_h: RigidTransform, x_j: RigidTransform) -> RigidTransform:
    """Re-express a world transform in the head frame: x_h^-1 x_j."""
    return compose(invert(x_h), x_j)


def visible(frustum: FrustumSpec, x_h: RigidTransform, hand_pos: Tensor) -> int:
    """1 iff the hand position lies inside the camera frustum.

    The camera frame is compose(x_h, mount); depth is the +z coordinate and
    the angular test compares atan2 off-axis angles against the half-fovs.
    """
    cam = compose(x_h, frustum.mount)
    p = cam.rotation.transpose(-1, -2) @ (hand_pos - cam.translation)
    depth = p[2]
    if not (frustum.near <= depth <= frustum.far):
        return 0
    if abs(math.degrees(math.atan2(abs(float(p[0])), float(depth)))) > frustum.hfov / 2:
        return 0
    if abs(math.degrees(math.atan2(abs(float(p[1])), float(depth)))) > frustum.vfov / 2:
        return 0
    return 1


def velocity(prev: RigidTransform, cur: RigidTransform) -> VelocityDelta:
    return VelocityDelta(geodesic_delta(prev.rotation, cur.rotation), cur.translation - prev.translation)


def synthesize_stream(
    motion: MotionSequence,
    skel: SkeletonSpec,
    mode: ScenarioMode = ScenarioMode.MC,
    frustum: FrustumSpec | None = None,
) -> list[HmdFrame]:
    """Ground-truth motion -> per-frame device stream.

    In HT mode a hand outside the frustum gets identity/zero sentinels for its
    transform and velocity fields; a hand is treated as freshly observed (zero
    velocity) on its first visible frame after a gap and at t = 0.
    """
    if motion.joint_count != skel.joint_count:
        raise ShapeMismatch(
            f"motion has J={motion.joint_count}, skeleton J={skel.joint_count}"
        )
    frustum = frustum or default_frustum()
    theta = motion.theta.to(torch.float64)
    gamma = motion.gamma.to(torch.float64)
    pose = forward_kinematics(skel, theta, gamma)
    idx = {"h": skel.head_index, "l": skel.left_hand_index, "r": skel.right_hand_index}

    def world(stream: str, t: int) -> RigidTransform:
        return RigidTransform(pose.rotations[t, idx[stream]], pose.positions[t, idx[stream]])

    frames: list[HmdFrame] = []
    ident = RigidTransform.identity()
    prev: dict[str, RigidTransform] = {}
    prev_nu = {"l": 0, "r": 0}
    for t in range(motion.frames):
        x_h = world("h", t)
        x_l, x_r = world("l", t), world("r", t)
        if mode == ScenarioMode.MC:
            nu_l = nu_r = 1
        else:
            nu_l = visible(frustum, x_h, x_l.translation)
            nu_r = visible(frustum, x_h, x_r.translation)
        cur = {"h": x_h}
        cur["l"] = x_l if nu_l else ident
        cur["r"] = x_r if nu_r else ident
        cur["lh"] = head_space(x_h, x_l) if nu_l else ident
        cur["rh"] = head_space(x_h, x_r) if nu_r else ident

        vel = {}
        vel["h"] = velocity(prev["h"], x_h) if t > 0 else VelocityDelta.zero()
        for hand, nu in (("l", nu_l), ("r", nu_r)):
            hs = hand + "h"
            if nu and prev_nu[hand] and t > 0:
                vel[hand] = velocity(prev[hand], cur[hand])
                vel[hs] = velocity(prev[hs], cur[hs])
            else:
                vel[hand] = VelocityDelta.zero()
                vel[hs] = VelocityDelta.zero()

        frames.append(
            HmdFrame(
                x_h=cur["h"], x_l=cur["l"], x_r=cur["r"], x_lh=cur["lh"], x_rh=cur["rh"],
                v_h=vel["h"], v_l=vel["l"], v_r=vel["r"], v_lh=vel["lh"], v_rh=vel["rh"],
                nu_l=nu_l, nu_r=nu_r,
            )
        )
        prev = cur
        prev_nu = {"l": nu_l, "r": nu_r}
    return frames


def featurize(frame: HmdFrame) -> Tensor:
    """Flatten a frame into the 92-vector the network consumes.

    Ten 9-d blocks (6D rotation then translation) ordered x_h, x_l, x_r,
    x_lh, x_rh, then the five velocity blocks in the same stream order, then
    the two visibility bits.
    """
    blocks = []
    for tf in (frame.x_h, frame.x_l, frame.x_r, frame.x_lh, frame.x_rh):
        blocks.append(torch.cat([rot6d_encode(tf.rotation), tf.translation]))
    for v in (frame.v_h, frame.v_l, frame.v_r, frame.v_lh, frame.v_rh):
        blocks.append(torch.cat([rot6d_encode(v.rotation), v.translation]))
    blocks.append(torch.tensor([float(frame.nu_l), float(frame.nu_r)], dtype=torch.float64))
    return torch.cat(blocks).to(torch.float32)


def stream_to_features(frames: list[HmdFrame]) -> tuple[Tensor, np.ndarray]:
    """(T,92) float32 features plus (T,2) uint8 visibility."""
    feats = torch.stack([featurize(f) for f in frames])
    vis = np.array([[f.nu_l, f.nu_r] for f in frames], dtype=np.uint8)
    return feats, vis


def parse_feature_block(features: Tensor, block: int) -> RigidTransform:
    """Recover the transform stored in one 9-d block of a feature vector."""
    seg = features[9 * block : 9 * block + 9].to(torch.float64)
    return RigidTransform(rot6d_decode(seg[:6]), seg[6:])


def visibility_stats(streams: list[list[HmdFrame]]) -> tuple[float, float]:
    """Fraction of frames with each hand visible, pooled over all streams."""
    total = sum(len(s) for s in streams)
    if total == 0:
        raise EmptyInput("no frames to compute visibility statistics on")
    left = sum(f.nu_l for s in streams for f in s)
    right = sum(f.nu_r for s in streams for f in s)
    return left / total, right / total


# ---------------------------------------------------------------------------
# synthetic motion
# ---------------------------------------------------------------------------

_KINDS = ("walk", "arm_swing", "idle_sway")


def _swing_then_drop(phi_x: np.ndarray, alpha_z: float) -> np.ndarray:
    """Axis-angle track for a shoulder: drop the arm by alpha_z about z, then
    swing it about the parent x-axis by the per-frame angle phi_x."""
    from .kinematics import aa_to_matrix, matrix_to_aa

    phi = torch.as_tensor(phi_x, dtype=torch.float64)
    zero = torch.zeros_like(phi)
    rx = aa_to_matrix(torch.stack([phi, zero, zero], dim=-1))
    rz = aa_to_matrix(torch.tensor([0.0, 0.0, alpha_z], dtype=torch.float64))
    return matrix_to_aa(rx @ rz).numpy()


def generate_synthetic_motion(kind: str, T: int, fps: float = 30.0, seed: int = 0) -> MotionSequence:
    """Deterministic band-limited sinusoidal motion on the default 22-joint
    topology.

    walk       legs and arms swing, root advances along +z
    arm_swing  arms sweep forward/up far enough to cross the default frustum
               boundary both ways
    idle_sway  small torso/arm sway, per-frame joint deltas well under 0.1 rad
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown motion kind {kind!r}; choose from {_KINDS}")
    if T < 2:
        raise ValueError("need at least 2 frames")
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64) / fps
    theta = np.zeros((T, 22, 3), dtype=np.float64)
    gamma = np.zeros((T, 3), dtype=np.float64)
    gamma[:, 1] = 0.95  # standing pelvis height

    def track(amp, freq, phase=None):
        phase = rng.uniform(0, 2 * np.pi) if phase is None else phase
        return amp * np.sin(2 * np.pi * freq * t + phase)

    down = 0.48 * np.pi  # arms hang nearly straight down from the T-pose rest

    if kind == "walk":
        f = 0.9
        theta[:, _L_HIP, 0] = track(0.45, f, 0.0)
        theta[:, _R_HIP, 0] = track(0.45, f, np.pi)
        theta[:, _L_KNEE, 0] = 0.5 + track(0.4, f, -0.5 * np.pi)
        theta[:, _R_KNEE, 0] = 0.5 + track(0.4, f, 0.5 * np.pi)
        theta[:, _L_SHOULDER] = _swing_then_drop(track(0.35, f, np.pi), -down)
        theta[:, _R_SHOULDER] = _swing_then_drop(track(0.35, f, 0.0), down)
        theta[:, _SPINE1, 1] = track(0.08, f)
        theta[:, 0, 1] = track(0.06, f)
        gamma[:, 2] += 1.1 * t
        gamma[:, 1] += 0.02 * np.sin(2 * np.pi * 2 * f * t)
    elif kind == "arm_swing":
        f = 0.45
        # forward sweeps large enough to enter and leave the camera frustum
        theta[:, _L_SHOULDER] = _swing_then_drop(-0.85 + track(0.75, f, 0.0), -down)
        theta[:, _R_SHOULDER] = _swing_then_drop(-0.85 + track(0.75, 1.35 * f, 0.8), down)
        theta[:, _L_ELBOW, 0] = -0.25 + track(0.25, 0.8 * f)
        theta[:, _R_ELBOW, 0] = -0.25 + track(0.25, 0.75 * f)
        theta[:, _SPINE1, 0] = track(0.06, 0.3)
        theta[:, 0, 1] = track(0.05, 0.25)
        gamma[:, 0] += track(0.02, 0.3)
    else:  # idle_sway
        theta[:, _SPINE1, 0] = track(0.04, 0.3)
        theta[:, _SPINE1, 2] = track(0.03, 0.22)
        theta[:, 0, 1] = track(0.05, 0.2)
        theta[:, _L_SHOULDER] = _swing_then_drop(track(0.05, 0.35), -down)
        theta[:, _R_SHOULDER] = _swing_then_drop(track(0.05, 0.3), down)
        gamma[:, 0] += track(0.01, 0.25)
        gamma[:, 2] += track(0.01, 0.2)

    return MotionSequence(
        torch.as_tensor(theta, dtype=torch.float32),
        torch.as_tensor(gamma, dtype=torch.float32),
        fps,
    )
