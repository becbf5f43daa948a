"""
异常定义模块

ShadowLab 的异常层级，以及异常到命令行退出码的映射。
"""

from typing import Optional, Sequence


class ShadowLabError(Exception):
    """ShadowLab 异常基类"""

    exit_code = 3


class ConfigurationError(ShadowLabError):
    """配置错误（退出码 2）"""

    exit_code = 2


class NumericalError(ShadowLabError):
    """数值计算阶段错误（退出码 3）"""

    exit_code = 3


class EscapedError(NumericalError):
    """轨道逃逸：状态范数超过配置的边界"""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class DomainError(NumericalError):
    """时间或状态超出有效范围"""
    pass


class GeometryError(NumericalError):
    """截面几何构造失败"""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else [float(v) for v in point]


class NotSingularApproachError(NumericalError):
    """轨道在时间预算内没有进入奇点的邻域"""
    pass


class FrameCollapseError(NumericalError):
    """切标架退化，需要调用方重新正交化"""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class GridTooCoarseError(NumericalError):
    """对齐网格过粗：单元连续模超过 ε/4"""

    def __init__(self, message: str, modulus: float):
        super().__init__(message)
        self.modulus = modulus


class InconclusiveError(ShadowLabError):
    """结论不确定（退出码 4）"""

    exit_code = 4


class StageError(ShadowLabError):
    """实验子阶段错误，带阶段名称"""

    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"阶段 '{stage}' 失败: {error}")
        self.stage = stage
        self.error = error
        self.exit_code = exit_code_for(error)


def exit_code_for(error: Optional[BaseException]) -> int:
    """
    把异常映射为命令行退出码

    Args:
        error: 异常对象，None 表示成功

    Returns:
        0 成功，2 配置错误，3 数值错误，4 不确定
    """
    if error is None:
        return 0
    if isinstance(error, ShadowLabError):
        return int(error.exit_code)
    return 3
