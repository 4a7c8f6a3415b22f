"""Differentiable (batched) counterparts of the numpy kinematics.

Used inside training losses; the numpy implementations in
:mod:`egosocial.kinematics` stay the reference and the two are tested
against each other.
"""

from __future__ import annotations

import torch

from .kinematics import BodyModel


def axis_angle_to_matrix_torch(aa: torch.Tensor) -> torch.Tensor:
    """Rodrigues for a (..., 3) tensor of axis-angles -> (..., 3, 3) rotations.

    The angle is computed from a clamped squared norm so the gradient stays
    finite at the zero rotation.
    """
    theta2 = (aa * aa).sum(dim=-1)
    theta = torch.sqrt(torch.clamp(theta2, min=1e-30))
    k1 = (torch.sin(theta) / theta).unsqueeze(-1).unsqueeze(-1)
    k2 = ((1.0 - torch.cos(theta)) / theta2.clamp(min=1e-30)).unsqueeze(-1).unsqueeze(-1)

    zeros = torch.zeros_like(aa[..., 0])
    kx, ky, kz = aa[..., 0], aa[..., 1], aa[..., 2]
    skew = torch.stack(
        [
            torch.stack([zeros, -kz, ky], dim=-1),
            torch.stack([kz, zeros, -kx], dim=-1),
            torch.stack([-ky, kx, zeros], dim=-1),
        ],
        dim=-2,
    )
    eye = torch.eye(3, dtype=aa.dtype, device=aa.device).expand(skew.shape)
    return eye + k1 * skew + k2 * (skew @ skew)


def forward_kinematics_torch(pose: torch.Tensor, body: BodyModel) -> torch.Tensor:
    """Joint world positions for a (..., V) pose batch -> (..., J, 3).

    Same chain rule as the numpy version: root at transl, child offsets
    carried by the parent's accumulated rotation.
    """
    j = body.joint_count
    if pose.shape[-1] != body.pose_dim:
        raise ValueError(f"pose width {pose.shape[-1]} does not match body V={body.pose_dim}")
    aa = pose[..., : 3 * j].reshape(*pose.shape[:-1], j, 3)
    transl = pose[..., -3:]
    rots = axis_angle_to_matrix_torch(aa)

    offsets = torch.as_tensor(body.rest_offsets, dtype=pose.dtype, device=pose.device)
    world_rot = [rots[..., 0, :, :]]
    rel_pos = [torch.zeros_like(transl)]
    for idx in range(1, j):
        p = int(body.parents[idx])
        rel_pos.append(rel_pos[p] + torch.einsum("...ij,j->...i", world_rot[p], offsets[idx]))
        world_rot.append(world_rot[p] @ rots[..., idx, :, :])
    # translation enters as the single final add, matching the numpy version
    return torch.stack(rel_pos, dim=-2) + transl.unsqueeze(-2)
