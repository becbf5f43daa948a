"""
链引擎模块

有限 (δ,T)-链的构造、求值、校验与读写。
"""

from .builders import (
    APPROACH_BUDGET,
    SideApproach,
    accumulated_branch,
    approach_time,
    branch_leg,
    build_adversarial_chain,
    build_perturbed_chain,
    build_three_leg_chain,
    chain_summary,
    find_side_approach_point,
    resolve_branch,
    uniform_in_ball,
)
from .chain import (
    DEFECT_MARGIN_FACTOR,
    ChainClock,
    ChainValidation,
    FiniteChain,
    chain_eval,
    chain_from_orbit,
    chain_sample,
    chain_window,
    jump_sizes,
    validate_chain,
)
from .io import load_chain, read_chain_records, save_chain

__all__ = [
    # 类型
    "FiniteChain",
    "ChainClock",
    "ChainValidation",
    "DEFECT_MARGIN_FACTOR",

    # 求值与校验
    "chain_eval",
    "chain_sample",
    "validate_chain",
    "jump_sizes",
    "chain_from_orbit",
    "chain_window",

    # 构造器
    "build_perturbed_chain",
    "build_adversarial_chain",
    "build_three_leg_chain",
    "find_side_approach_point",
    "accumulated_branch",
    "resolve_branch",
    "SideApproach",
    "approach_time",
    "branch_leg",
    "uniform_in_ball",
    "chain_summary",
    "APPROACH_BUDGET",

    # 读写
    "save_chain",
    "load_chain",
    "read_chain_records",
]
