"""
截面几何模块

吸引子采样、稳定方向估计、单侧/双侧点分类、奇异截面以及不稳定分支路标。
"""

from .attractor import (
    POINT_CLOUD_MAGIC,
    AttractorSample,
    load_point_cloud,
    sample_attractor,
    save_point_cloud,
)
from .branches import (
    BranchCurve,
    UnstableBranches,
    backward_contained,
    branch_landmarks,
    certify_launches,
    mirror_defect,
    separation_holds,
    trace_unstable_branches,
)
from .sections import (
    BRANCH_SIGNS,
    CrossSection,
    SingularSectionPair,
    branch_sign,
    build_singular_sections,
    check_transversality,
    exit_side,
    first_entry_time,
    first_exit_time,
    l_star_reaches,
    locate_l_star,
)
from .sides import (
    SideClassification,
    SideVerdict,
    bi_side_invariance_audit,
    boundary_type_audit,
    classify_side,
    radius_halving_audit,
    radius_schedule,
    strong_stable_audit,
)
from .stable import StableDirection, estimate_stable_direction, line_angle_deg

__all__ = [
    # 吸引子样本
    "AttractorSample",
    "sample_attractor",
    "save_point_cloud",
    "load_point_cloud",
    "POINT_CLOUD_MAGIC",

    # 稳定方向
    "StableDirection",
    "estimate_stable_direction",
    "line_angle_deg",

    # 单侧/双侧分类
    "SideVerdict",
    "SideClassification",
    "classify_side",
    "radius_schedule",
    "bi_side_invariance_audit",
    "radius_halving_audit",
    "strong_stable_audit",
    "boundary_type_audit",

    # 奇异截面
    "CrossSection",
    "SingularSectionPair",
    "build_singular_sections",
    "check_transversality",
    "locate_l_star",
    "l_star_reaches",
    "exit_side",
    "first_entry_time",
    "first_exit_time",
    "branch_sign",
    "BRANCH_SIGNS",

    # 不稳定分支与路标
    "BranchCurve",
    "UnstableBranches",
    "trace_unstable_branches",
    "backward_contained",
    "branch_landmarks",
    "separation_holds",
    "certify_launches",
    "mirror_defect",
]
