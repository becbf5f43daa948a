"""
向量场定义

ℝ³ 上带解析 Jacobian 的光滑向量场 X，以及 Jacobian 交叉校验。
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

Vector = np.ndarray
VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """
    命名向量场

    Attributes:
        name: 模型名称
        vector_fn: 状态 → 速度
        jacobian_fn: 状态 → 3×3 Jacobian
        singularities: 解析已知的零点 X(q)=0
        params: 模型参数
        box: 声明的包围盒 (lower, upper)，用于 Jacobian 校验采样
        dim: 维数（固定为 3）
    """

    name: str
    vector_fn: VectorFn
    jacobian_fn: VectorFn
    singularities: Tuple[np.ndarray, ...] = ()
    params: Dict[str, Any] = field(default_factory=dict)
    box: Tuple[Tuple[float, float, float], Tuple[float, float, float]] = (
        (-1.0, -1.0, -1.0),
        (1.0, 1.0, 1.0),
    )
    dim: int = 3

    def eval(self, x: np.ndarray) -> np.ndarray:
        """求 X(x)"""
        return np.asarray(self.vector_fn(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """求 DX(x)"""
        return np.asarray(self.jacobian_fn(np.asarray(x, dtype=float)), dtype=float)

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        """solve_ivp 形式的右端项"""
        return self.vector_fn(x)

    def speed(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.eval(x)))

    def reversed(self) -> "VectorFieldSpec":
        """时间反向的向量场 -X，用于负时间流"""
        vector_fn, jacobian_fn = self.vector_fn, self.jacobian_fn
        return VectorFieldSpec(
            name=f"{self.name}~reversed",
            vector_fn=lambda x: -vector_fn(x),
            jacobian_fn=lambda x: -jacobian_fn(x),
            singularities=self.singularities,
            params=dict(self.params),
            box=self.box,
        )

    def describe(self) -> Dict[str, Any]:
        """用于报告的可序列化描述"""
        return {
            "name": self.name,
            "params": dict(self.params),
            "singularities": [q.tolist() for q in self.singularities],
        }


def singularity_residuals(spec: VectorFieldSpec) -> np.ndarray:
    """每个已登记奇点处 |X(q)|"""
    return np.array([np.linalg.norm(spec.eval(q)) for q in spec.singularities])


def jacobian_check(
    spec: VectorFieldSpec,
    n: int = 100,
    seed: int = 0,
    h: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    用中心差分校验解析 Jacobian

    Args:
        spec: 向量场
        n: 包围盒内随机状态个数
        seed: 随机种子（未给出 rng 时使用）
        h: 相对差分步长
        rng: 可选的随机数生成器

    Returns:
        最大相对误差 ‖J_fd − J‖ / max(‖J‖, 1)
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    lower, upper = (np.asarray(b, dtype=float) for b in spec.box)
    worst = 0.0
    for x in rng.uniform(lower, upper, size=(n, 3)):
        exact = spec.jacobian(x)
        approx = np.empty((3, 3))
        for j in range(3):
            step = h * max(1.0, abs(x[j]))
            e = np.zeros(3)
            e[j] = step
            approx[:, j] = (spec.eval(x + e) - spec.eval(x - e)) / (2.0 * step)
        err = np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), 1.0)
        worst = max(worst, float(err))
    return worst
