"""
模型目录

实验使用的具体向量场：Lorenz、线性鞍点、极限环范式和一般线性场。
"""

import math
from typing import Any, Callable, Dict, Tuple

import numpy as np
from loguru import logger

from ..errors import ConfigurationError
from ..flow.field import VectorFieldSpec

# 经典 Lorenz 参数
LORENZ_DEFAULTS = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> VectorFieldSpec:
    """经典 Lorenz 场"""
    if sigma <= 0 or beta <= 0 or rho <= 1:
        raise ConfigurationError(
            f"Lorenz 参数超出范围 (sigma>0, beta>0, rho>1): {sigma}, {rho}, {beta}"
        )

    def vector_fn(s: np.ndarray) -> np.ndarray:
        x, y, z = s
        return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])

    def jacobian_fn(s: np.ndarray) -> np.ndarray:
        x, y, z = s
        return np.array(
            [
                [-sigma, sigma, 0.0],
                [rho - z, -1.0, -x],
                [y, x, -beta],
            ]
        )

    c = math.sqrt(beta * (rho - 1.0))
    singularities = (
        np.zeros(3),
        np.array([c, c, rho - 1.0]),
        np.array([-c, -c, rho - 1.0]),
    )
    return VectorFieldSpec(
        name="lorenz",
        vector_fn=vector_fn,
        jacobian_fn=jacobian_fn,
        singularities=singularities,
        params={"sigma": sigma, "rho": rho, "beta": beta},
        box=((-30.0, -30.0, 0.0), (30.0, 30.0, 60.0)),
    )


def saddle(ls1: float = 2.0, ls2: float = 3.0, lu: float = 1.0) -> VectorFieldSpec:
    """线性鞍点 diag(−λs1, −λs2, λu)"""
    if min(ls1, ls2, lu) <= 0:
        raise ConfigurationError(f"鞍点速率必须为正: {ls1}, {ls2}, {lu}")
    matrix = np.diag([-ls1, -ls2, lu])
    spec = linear(matrix)
    return VectorFieldSpec(
        name="saddle",
        vector_fn=spec.vector_fn,
        jacobian_fn=spec.jacobian_fn,
        singularities=spec.singularities,
        params={"ls1": ls1, "ls2": ls2, "lu": lu},
        box=((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0)),
    )


def limit_cycle(a: float = 1.0) -> VectorFieldSpec:
    """
    极限环范式 r' = a·r(1−r²), θ' = 1, z' = −z

    单位圆 r=1, z=0 是吸引的周期轨道，周期 2π。
    """
    if a <= 0:
        raise ConfigurationError(f"极限环参数 a 必须为正: {a}")

    def vector_fn(s: np.ndarray) -> np.ndarray:
        x, y, z = s
        g = a * (1.0 - x * x - y * y)
        return np.array([g * x - y, g * y + x, -z])

    def jacobian_fn(s: np.ndarray) -> np.ndarray:
        x, y, z = s
        g = a * (1.0 - x * x - y * y)
        return np.array(
            [
                [g - 2 * a * x * x, -2 * a * x * y - 1.0, 0.0],
                [-2 * a * x * y + 1.0, g - 2 * a * y * y, 0.0],
                [0.0, 0.0, -1.0],
            ]
        )

    return VectorFieldSpec(
        name="limit_cycle",
        vector_fn=vector_fn,
        jacobian_fn=jacobian_fn,
        singularities=(np.zeros(3),),
        params={"a": a},
        box=((-1.5, -1.5, -1.0), (1.5, 1.5, 1.0)),
    )


def linear(matrix: Any) -> VectorFieldSpec:
    """常系数线性场 x' = A·x"""
    A = np.asarray(matrix, dtype=float)
    if A.shape != (3, 3) or not np.all(np.isfinite(A)):
        raise ConfigurationError(f"线性场矩阵必须是有限的 3×3 矩阵: {A.shape}")
    A = A.copy()
    return VectorFieldSpec(
        name="linear",
        vector_fn=lambda s: A @ s,
        jacobian_fn=lambda s: A,
        singularities=(np.zeros(3),),
        params={"matrix": A.tolist()},
        box=((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0)),
    )


MODEL_FACTORIES: Dict[str, Callable[..., VectorFieldSpec]] = {
    "lorenz": lorenz,
    "saddle": saddle,
    "limit_cycle": limit_cycle,
    "linear": linear,
}


def make_model(name: str, **params: Any) -> VectorFieldSpec:
    """
    按名称创建模型

    Args:
        name: 模型名称 (lorenz, saddle, limit_cycle, linear)
        **params: 模型参数

    Returns:
        VectorFieldSpec

    Raises:
        ConfigurationError: 未知模型名称或参数超出范围
    """
    key = name.replace("-", "_").lower()
    if key not in MODEL_FACTORIES:
        raise ConfigurationError(
            f"未知模型: {name}，可用模型: {', '.join(MODEL_FACTORIES)}"
        )
    try:
        spec = MODEL_FACTORIES[key](**params)
    except TypeError as e:
        raise ConfigurationError(f"模型 {name} 的参数无效: {e}") from e
    logger.debug(f"创建模型 {spec.name}: {spec.params}")
    return spec


def singularity_spectrum(spec: VectorFieldSpec, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    奇点处 Jacobian 的特征值与特征向量

    Returns:
        (按实部升序排列的特征值, 对应的单位特征向量（按列）)
    """
    values, vectors = np.linalg.eig(spec.jacobian(q))
    order = np.argsort(values.real)
    vectors = vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return values[order], vectors


def is_lorenz_like(spec: VectorFieldSpec, q: np.ndarray) -> bool:
    """
    Lorenz 型奇点判定

    特征值为实数且 λss < λs < 0 < λu，并满足 λu + λs > 0。
    """
    values, _ = singularity_spectrum(spec, q)
    if np.any(np.abs(values.imag) > 1e-12):
        return False
    lss, ls, lu = values.real
    return bool(lss < ls < 0.0 < lu and lu + ls > 0.0)


def lorenz_like_frame(spec: VectorFieldSpec, q: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Lorenz 型奇点的特征方向

    Returns:
        {"unstable", "weak_stable", "strong_stable"}：单位实向量，
        unstable 的第一个非零分量取正号
    """
    values, vectors = singularity_spectrum(spec, q)
    vectors = vectors.real
    frame = {
        "strong_stable": vectors[:, 0],
        "weak_stable": vectors[:, 1],
        "unstable": vectors[:, 2],
    }
    for key, v in frame.items():
        pivot = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
        frame[key] = v * np.sign(pivot)
    frame["eigenvalues"] = values.real
    return frame
