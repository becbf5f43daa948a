"""
追踪模块

重参数化类、单调时间对齐以及带证书的追踪判定。
"""

from .alignment import (
    Alignment,
    AlignmentGrid,
    align_normal,
    align_strong,
    align_weak,
    band_alignment,
    build_grid,
    weak_alignment,
    witness_from_path,
)
from .reparam import RepClasses, Reparametrization, classify, rep_eval
from .verifier import (
    CandidateResult,
    DeltaSweep,
    DeltaSweepRow,
    ImplicationAudit,
    TraceBudget,
    TraceClass,
    TraceVerdict,
    delta_sweep,
    evaluate_candidate,
    implication_audit,
    parse_trace_class,
    recheck_certificate,
    verdict_class_ok,
    verify_trace,
)

__all__ = [
    # 重参数化
    "Reparametrization",
    "RepClasses",
    "rep_eval",
    "classify",

    # 对齐
    "AlignmentGrid",
    "Alignment",
    "build_grid",
    "weak_alignment",
    "band_alignment",
    "witness_from_path",
    "align_weak",
    "align_normal",
    "align_strong",

    # 判定
    "TraceClass",
    "TraceBudget",
    "TraceVerdict",
    "CandidateResult",
    "parse_trace_class",
    "evaluate_candidate",
    "verify_trace",
    "verdict_class_ok",
    "recheck_certificate",

    # 审计与扫描
    "ImplicationAudit",
    "implication_audit",
    "DeltaSweep",
    "DeltaSweepRow",
    "delta_sweep",
]
