"""Teacher maintenance: deep-copy initialization and temporal-average updates.

The teacher never receives gradients. Its state (including batch-norm running
statistics) is the exponential moving average of the student's state with
momentum ``ema_momentum``; integer buffers such as batch counters are copied
from the student instead of averaged.
"""

import copy

import torch
from torch import nn

from .errors import ConfigError, InputError


def init_teacher(student: nn.Module) -> nn.Module:
    """Deep copy of the student, detached from gradient updates, in eval mode."""
    teacher = copy.deepcopy(student)
    for param in teacher.parameters():
        param.requires_grad_(False)
    teacher.eval()
    return teacher


@torch.no_grad()
def ema_update(teacher: nn.Module, student: nn.Module, momentum: float) -> None:
    """In-place update: teacher = momentum * teacher + (1 - momentum) * student.

    Applies to every floating tensor in the state dict, parameters and running
    statistics alike. ``momentum`` must lie in [0, 1); 0 copies the student.
    """
    if not 0.0 <= momentum < 1.0:
        raise ConfigError(f"ema momentum must be in [0, 1), got {momentum}")
    t_state = teacher.state_dict()
    s_state = student.state_dict()
    if t_state.keys() != s_state.keys():
        raise InputError("teacher and student state dicts have different names")
    for name, t_arr in t_state.items():
        s_arr = s_state[name]
        if t_arr.shape != s_arr.shape:
            raise InputError(f"shape mismatch for {name}")
        if t_arr.is_floating_point():
            t_arr.mul_(momentum).add_(s_arr, alpha=1.0 - momentum)
        else:
            t_arr.copy_(s_arr)
