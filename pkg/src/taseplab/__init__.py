"""Two-speed TASEP with step initial data: exact kernels, limits and simulation."""

__version__ = "0.1.0"

from .lattice import (ParticleSystem, SpaceLikePoint, SpaceLikeSet, ZrpConfig, make_step_system,
                      tasep_to_zrp, zrp_to_tasep)
from .kernels import KernelContext, kernel, kernel_matrix
from .fredholm import joint_tail
from .oracle import joint_tail_oracle, solve_master
from .simulator import SimConfig, run_tasep, run_zrp
