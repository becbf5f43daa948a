"""
流的数值实现

用固定的 DOP853 嵌入式 Runge-Kutta 对（带稠密输出）积分轨道，
实现 X_t(x)、轨道窗口和插值求值。
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import DOP853, OdeSolution

from ..errors import DomainError, EscapedError, NumericalError
from .field import VectorFieldSpec

# DOP853 稠密输出的插值阶数
DENSE_ORDER = 7


@dataclass(frozen=True)
class Tolerance:
    """
    积分误差目标与步长控制

    Attributes:
        rtol: 相对误差
        atol: 绝对误差
        escape_bound: 状态范数上界，超过即视为逃逸
        max_step: 最大步长上限
        speed_scale: 速度参考值；|X| 低于它时步长上限按比例收缩
        min_step_cap: 收缩后的步长上限下界
    """

    rtol: float = 1e-9
    atol: float = 1e-9
    escape_bound: float = 1e4
    max_step: float = 0.1
    speed_scale: float = 1.0
    min_step_cap: float = 1e-2

    def halved(self) -> "Tolerance":
        return Tolerance(
            rtol=self.rtol / 2,
            atol=self.atol / 2,
            escape_bound=self.escape_bound,
            max_step=self.max_step,
            speed_scale=self.speed_scale,
            min_step_cap=self.min_step_cap,
        )

    def scale(self, x: np.ndarray) -> float:
        """该状态处的误差尺度 atol + rtol·|x|"""
        return self.atol + self.rtol * float(np.linalg.norm(x))

    def step_cap(self, speed: float) -> float:
        """速度比例步长上限"""
        ratio = min(1.0, speed / self.speed_scale)
        return max(self.min_step_cap, self.max_step * ratio)


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    稠密采样的轨道段 X_t(x0), t ∈ [0, T]

    节点处求值与存储状态逐位一致，节点之间用局部插值。
    `offset` 非零时表示长轨道上的一段视图。
    """

    x0: np.ndarray
    times: np.ndarray
    states: np.ndarray
    tolerance: Tolerance = DEFAULT_TOLERANCE
    solution: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )
    offset: float = 0.0
    order: int = DENSE_ORDER

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1].copy()

    def __len__(self) -> int:
        return len(self.times)

    def _check(self, t: np.ndarray) -> None:
        slack = 1e-12 * max(1.0, self.T)
        if np.any(t < -slack) or np.any(t > self.T + slack):
            raise DomainError(f"时间超出轨道范围 [0, {self.T}]: {t.min()}..{t.max()}")

    def flow_at(self, t: float) -> np.ndarray:
        """求 X_t(x0)"""
        return self.sample(np.array([t], dtype=float))[0]

    __call__ = flow_at

    def sample(self, ts: np.ndarray) -> np.ndarray:
        """向量化求值，返回 (len(ts), 3)"""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        self._check(ts)
        ts = np.clip(ts, 0.0, self.T)
        if self.solution is None:
            out = np.repeat(self.states[:1], len(ts), axis=0)
        else:
            out = np.asarray(self.solution(ts + self.offset)).T.reshape(len(ts), 3)
            out = np.array(out, dtype=float)
        idx = np.searchsorted(self.times, ts)
        idx = np.clip(idx, 0, len(self.times) - 1)
        exact = self.times[idx] == ts
        out[exact] = self.states[idx[exact]]
        return out

    def segment(self, t0: float, t1: float) -> "Trajectory":
        """
        截取 [t0, t1] 段，返回以 X_{t0}(x0) 为起点的新轨道视图
        """
        if not 0.0 <= t0 <= t1 <= self.T:
            raise DomainError(f"非法截取区间 [{t0}, {t1}]，轨道长度 {self.T}")
        inner = self.times[(self.times > t0) & (self.times < t1)]
        node_times = np.concatenate([[t0], inner, [t1]]) if t1 > t0 else np.array([t0])
        states = self.sample(node_times)
        return Trajectory(
            x0=states[0].copy(),
            times=node_times - t0,
            states=states,
            tolerance=self.tolerance,
            solution=self.solution,
            offset=self.offset + t0,
            order=self.order,
        )


def _check_inputs(x0: np.ndarray, T: float) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(3)
    if not np.all(np.isfinite(x0)):
        raise ValueError(f"初始状态必须有限: {x0}")
    if T < 0:
        raise ValueError(f"积分时长必须非负: {T}")
    return x0


def integrate(
    spec: VectorFieldSpec,
    x0: np.ndarray,
    T: float,
    tol: Optional[Tolerance] = None,
) -> Trajectory:
    """
    积分轨道 X_t(x0), t ∈ [0, T]

    Args:
        spec: 向量场
        x0: 初始状态
        T: 时长（≥ 0）
        tol: 误差目标，默认 rtol=atol=1e-9

    Returns:
        带稠密输出的 Trajectory

    Raises:
        ValueError: T < 0 或 x0 非有限
        EscapedError: 状态范数超过逃逸上界
    """
    tol = tol or DEFAULT_TOLERANCE
    x0 = _check_inputs(x0, T)
    if np.linalg.norm(x0) > tol.escape_bound:
        raise EscapedError(f"初始状态已超出逃逸上界 {tol.escape_bound}", last_time=0.0)
    if T == 0:
        return Trajectory(
            x0=x0,
            times=np.array([0.0]),
            states=x0.reshape(1, 3).copy(),
            tolerance=tol,
        )

    solver = DOP853(
        spec.rhs,
        0.0,
        x0,
        T,
        rtol=tol.rtol,
        atol=tol.atol,
        max_step=tol.step_cap(spec.speed(x0)),
    )
    ts: List[float] = [0.0]
    ys: List[np.ndarray] = [x0.copy()]
    interpolants = []
    while solver.status == "running":
        solver.max_step = tol.step_cap(spec.speed(solver.y))
        message = solver.step()
        if solver.status == "failed":
            raise NumericalError(f"积分失败 ({spec.name}, t={solver.t}): {message}")
        y = solver.y
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > tol.escape_bound:
            raise EscapedError(
                f"轨道逃逸 ({spec.name})，最后有效时间 {ts[-1]:.6g}",
                last_time=ts[-1],
            )
        ts.append(float(solver.t))
        ys.append(y.copy())
        interpolants.append(solver.dense_output())

    times = np.asarray(ts)
    logger.debug(f"积分完成 {spec.name}: T={T}, 步数={len(times) - 1}")
    return Trajectory(
        x0=x0,
        times=times,
        states=np.vstack(ys),
        tolerance=tol,
        solution=OdeSolution(times, interpolants),
    )


def flow_at(traj: Trajectory, t: float) -> np.ndarray:
    """
    轨道上的插值状态

    Raises:
        DomainError: t 不在 [0, T] 内
    """
    return traj.flow_at(t)


def flow_map(
    spec: VectorFieldSpec,
    x0: np.ndarray,
    t: float,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """求 X_t(x0)，t < 0 时积分反向场"""
    if t >= 0:
        return integrate(spec, x0, t, tol).endpoint
    return integrate(spec.reversed(), x0, -t, tol).endpoint


def orbit_window(
    spec: VectorFieldSpec,
    x0: np.ndarray,
    t_minus: float,
    t_plus: float,
    tol: Optional[Tolerance] = None,
) -> Tuple[Trajectory, Trajectory]:
    """
    有限窗口上的轨道 O(p)

    Returns:
        (反向轨道 X_{-s}(x0), s ∈ [0, t_minus]; 正向轨道 X_t(x0), t ∈ [0, t_plus])
    """
    backward = integrate(spec.reversed(), x0, t_minus, tol)
    forward = integrate(spec, x0, t_plus, tol)
    return backward, forward


def step_doubling_error(
    spec: VectorFieldSpec,
    x0: np.ndarray,
    T: float,
    tol: Optional[Tolerance] = None,
) -> float:
    """
    以半误差目标重积分，返回终点差与误差尺度之比

    小于 10 即满足步长加倍一致性。
    """
    tol = tol or DEFAULT_TOLERANCE
    coarse = integrate(spec, x0, T, tol).endpoint
    fine = integrate(spec, x0, T, tol.halved()).endpoint
    return float(np.linalg.norm(coarse - fine) / tol.scale(fine))
