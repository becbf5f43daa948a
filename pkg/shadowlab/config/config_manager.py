from __future__ import annotations
import copy
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from threading import Lock
from typing import Any, Dict, List, Optional, Tuple

import yaml

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "SHADOWLAB_"
ENV_SEPARATOR = "__"

EXPERIMENT_KINDS = ("fpotp-failure", "side-point-failure", "hyperbolic-control", "limit-cycle-control")
CHAIN_BUILDERS = ("adversarial", "three-leg", "perturbed")
CHAIN_BRANCHES = ("l", "r", "auto")
TRACE_CLASSES = ("weak", "normal", "strong")
PLOT_KINDS = ("trace-distance", "error-vs-delta", "branches", "side-map", "growth")


def _positive(section: str, **values: Any) -> None:
    for name, value in values.items():
        if value is None or not value > 0:
            raise ConfigurationError(f"{section}.{name} 必须为正: {value}")


@dataclass
class ModelConfig:
    """向量场模型配置"""
    name: str = "lorenz"
    params: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        from ..models.catalog import make_model

        make_model(self.name, **self.params)


@dataclass
class IntegratorConfig:
    """积分误差目标"""
    rtol: float = 1e-9
    atol: float = 1e-9
    escape_bound: float = 1e4
    max_step: float = 0.1
    min_step_cap: float = 1e-2

    def validate(self) -> None:
        _positive("integrator", rtol=self.rtol, atol=self.atol, escape_bound=self.escape_bound,
                  max_step=self.max_step, min_step_cap=self.min_step_cap)

    def to_tolerance(self):
        from ..flow.integrator import Tolerance

        return Tolerance(
            rtol=self.rtol,
            atol=self.atol,
            escape_bound=self.escape_bound,
            max_step=self.max_step,
            min_step_cap=self.min_step_cap,
        )


@dataclass
class AttractorConfig:
    """吸引子采样配置"""
    x0: List[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    transient: float = 100.0
    duration: float = 1000.0
    count: int = 100_000
    cache_path: Optional[str] = None

    def validate(self) -> None:
        _positive("attractor", duration=self.duration, count=self.count)
        if self.transient < 0:
            raise ConfigurationError(f"attractor.transient 不能为负: {self.transient}")
        if len(self.x0) != 3:
            raise ConfigurationError(f"attractor.x0 必须是三维点: {self.x0}")


@dataclass
class ChainConfig:
    """链构造配置"""
    builder: str = "adversarial"
    T: float = 1.0
    branch: str = "auto"
    x0: List[float] = field(default_factory=lambda: [0.5, 0.5, 0.1])
    segments: int = 3
    segment_time: float = 0.5
    approach_budget: float = 1000.0

    def validate(self) -> None:
        if self.builder not in CHAIN_BUILDERS:
            raise ConfigurationError(f"未知的链构造器: {self.builder}，可选: {list(CHAIN_BUILDERS)}")
        if self.branch not in CHAIN_BRANCHES:
            raise ConfigurationError(f"chain.branch 必须是 {'、'.join(CHAIN_BRANCHES)} 之一: {self.branch}")
        _positive("chain", T=self.T, segments=self.segments, segment_time=self.segment_time,
                  approach_budget=self.approach_budget)
        if self.segment_time < self.T and self.builder == "perturbed":
            raise ConfigurationError(f"chain.segment_time={self.segment_time} 小于 T={self.T}")
        if len(self.x0) != 3:
            raise ConfigurationError(f"chain.x0 必须是三维点: {self.x0}")


@dataclass
class TracingConfig:
    """追踪判定配置；epsilon 为空时取 β_σ/4"""
    epsilon: Optional[float] = None
    trace_class: str = "weak"
    eps_rep: float = 0.1
    deltas: List[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    grid_spacing: Optional[float] = None
    grid_resolution: int = 2
    max_dt: float = 0.05
    subsample: int = 1000
    cloud_points: int = 1000
    refine_depth: int = 12
    refine_points: int = 32
    restrict_to_attractor: bool = False
    resolution: float = 1e-3
    orbit_factor: float = 1.5
    max_grid_refinements: int = 3
    batch_size: int = 64
    audit_candidates: int = 0

    def validate(self) -> None:
        if self.trace_class not in TRACE_CLASSES:
            raise ConfigurationError(f"未知的追踪类: {self.trace_class}")
        if self.epsilon is not None:
            _positive("tracing", epsilon=self.epsilon)
        if not self.deltas:
            raise ConfigurationError("tracing.deltas 不能为空")
        if any(d <= 0 for d in self.deltas):
            raise ConfigurationError(f"tracing.deltas 必须全部为正: {self.deltas}")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ConfigurationError(f"tracing.deltas 必须严格递减: {self.deltas}")
        if self.grid_resolution < 2:
            raise ConfigurationError(f"tracing.grid_resolution 必须 ≥ 2: {self.grid_resolution}")
        if self.grid_spacing is not None:
            _positive("tracing", grid_spacing=self.grid_spacing)
        if self.eps_rep < 0:
            raise ConfigurationError(f"tracing.eps_rep 不能为负: {self.eps_rep}")
        _positive("tracing", max_dt=self.max_dt, subsample=self.subsample, orbit_factor=self.orbit_factor,
                  batch_size=self.batch_size, resolution=self.resolution)
        if min(self.cloud_points, self.refine_depth, self.refine_points, self.max_grid_refinements,
               self.audit_candidates) < 0:
            raise ConfigurationError("tracing 的计数类参数不能为负")

    def to_budget(self):
        from ..tracing.verifier import TraceBudget

        return TraceBudget(
            subsample=self.subsample,
            cloud_points=self.cloud_points,
            refine_depth=self.refine_depth,
            refine_points=self.refine_points,
            restrict_to_attractor=self.restrict_to_attractor,
            resolution=self.resolution,
            orbit_factor=self.orbit_factor,
            grid_spacing=self.grid_spacing,
            max_dt=self.max_dt,
            min_nodes=self.grid_resolution,
            max_grid_refinements=self.max_grid_refinements,
            batch_size=self.batch_size,
        )


@dataclass
class GeometryConfig:
    """截面、分支路标与单侧点配置"""
    gamma: float = 1.0
    offset: float = 1.0
    extents: List[float] = field(default_factory=lambda: [0.5, 0.5])
    section_horizon: float = 5.0
    transversality_floor: float = 1e-3
    beta_floor: float = 1e-3
    launches: int = 100
    launch_width: float = 1e-3
    landmark_horizon: float = 2.0
    side_eps: float = 0.05
    side_radii: int = 4
    side_threshold: int = 5
    side_points: int = 20
    audit_times: List[float] = field(default_factory=lambda: [1.0, 5.0, 10.0])

    def validate(self) -> None:
        _positive("geometry", gamma=self.gamma, offset=self.offset, section_horizon=self.section_horizon,
                  transversality_floor=self.transversality_floor, beta_floor=self.beta_floor,
                  launches=self.launches, launch_width=self.launch_width,
                  landmark_horizon=self.landmark_horizon, side_eps=self.side_eps,
                  side_radii=self.side_radii, side_threshold=self.side_threshold)
        if len(self.extents) != 2 or min(self.extents) <= 0:
            raise ConfigurationError(f"geometry.extents 必须是两个正数: {self.extents}")
        if self.side_points < 0 or any(t <= 0 for t in self.audit_times):
            raise ConfigurationError("geometry.side_points 不能为负，audit_times 必须为正")


@dataclass
class GrowthConfig:
    """增长率测量配置；points 为 0 时跳过"""
    horizon: float = 50.0
    renorm: float = 0.5
    points: int = 10
    orbit_horizon: float = 20.0
    avoid_radius: float = 1.0

    def validate(self) -> None:
        _positive("growth", horizon=self.horizon, renorm=self.renorm, orbit_horizon=self.orbit_horizon,
                  avoid_radius=self.avoid_radius)
        if self.points < 0:
            raise ConfigurationError(f"growth.points 不能为负: {self.points}")


@dataclass
class OracleConfig:
    """一维 Lorenz 映射预言机配置"""
    c: float = 1.8
    alpha: float = 0.8
    x0: float = 0.3
    steps: int = 20

    def validate(self) -> None:
        from ..models.oracle import LorenzMapOracle

        LorenzMapOracle(c=self.c, alpha=self.alpha)
        if not -1.0 <= self.x0 <= 1.0 or self.steps < 0:
            raise ConfigurationError(f"oracle.x0 必须在 [−1, 1] 内且 steps 非负: {self.x0}, {self.steps}")


SECTIONS = {
    "model": ModelConfig,
    "integrator": IntegratorConfig,
    "attractor": AttractorConfig,
    "chain": ChainConfig,
    "tracing": TracingConfig,
    "geometry": GeometryConfig,
    "growth": GrowthConfig,
    "oracle": OracleConfig,
}


@dataclass
class ShadowLabConfig:
    """ShadowLab 实验配置"""
    # 基础配置
    project_name: str = "ShadowLab"
    version: str = "0.1.0"
    log_level: str = "INFO"

    # 实验
    experiment: str = "fpotp-failure"
    recipe: Optional[str] = None
    seed: int = 0
    workers: int = 1
    output_dir: str = "./shadowlab_out"
    plot_kinds: List[str] = field(default_factory=lambda: ["trace-distance", "error-vs-delta"])

    # 各阶段配置
    model: ModelConfig = field(default_factory=ModelConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    attractor: AttractorConfig = field(default_factory=AttractorConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    tracing: TracingConfig = field(default_factory=TracingConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    growth: GrowthConfig = field(default_factory=GrowthConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    # 其他配置
    extra_config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """设置日志级别"""
        if self.log_level:
            level = getattr(logging, str(self.log_level).upper(), None)
            if not isinstance(level, int):
                raise ConfigurationError(f"未知的日志级别: {self.log_level}")
            logging.getLogger('shadowlab').setLevel(level)

    def validate(self) -> "ShadowLabConfig":
        if self.experiment not in EXPERIMENT_KINDS:
            raise ConfigurationError(f"未知的实验类型: {self.experiment}，可选: {list(EXPERIMENT_KINDS)}")
        if self.workers < 1:
            raise ConfigurationError(f"workers 必须 ≥ 1: {self.workers}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError(f"seed 必须是非负整数: {self.seed}")
        unknown = [k for k in self.plot_kinds if k not in PLOT_KINDS]
        if unknown:
            raise ConfigurationError(f"未知的绘图数据类型: {unknown}")
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ShadowLabConfig":
        """
        从嵌套字典创建配置

        Raises:
            ConfigurationError: 未知的配置项
        """
        data = copy.deepcopy(data or {})
        kwargs: Dict[str, Any] = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigurationError(f"未知的配置项: {key}")
            if key in SECTIONS:
                section_cls = SECTIONS[key]
                if is_dataclass(value):
                    value = asdict(value)
                section_known = {f.name for f in fields(section_cls)}
                bad = set(value or {}) - section_known
                if bad:
                    raise ConfigurationError(f"未知的配置项: {', '.join(f'{key}.{b}' for b in sorted(bad))}")
                kwargs[key] = section_cls(**(value or {}))
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def flat_items(self) -> List[Tuple[str, Any]]:
        """扁平的点分路径与取值，即配置文件的文档化模式"""
        return sorted(_flatten(self.to_dict()))


ExperimentConfig = ShadowLabConfig


def _flatten(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    items = []
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict) and key != "params" and key != "extra_config":
            items.extend(_flatten(value, f"{path}."))
        else:
            items.append((path, value))
    return items


def expand_dotted(data: Dict[str, Any]) -> Dict[str, Any]:
    """把 "tracing.epsilon" 这样的点分键展开为嵌套字典"""
    out: Dict[str, Any] = {}
    for key, value in (data or {}).items():
        parts = str(key).split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        if isinstance(value, dict):
            value = expand_dotted(value)
        if isinstance(value, dict) and isinstance(node.get(parts[-1]), dict):
            node[parts[-1]] = deep_merge(node[parts[-1]], value)
        else:
            node[parts[-1]] = value
    return out


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并，update 优先"""
    merged = copy.deepcopy(base)
    for key, value in (update or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key not in ("params", "extra_config"):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigManager:
    """配置管理器"""

    _instance = None
    _lock = Lock()

    def __new__(cls):
        """单例模式"""
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        """初始化配置管理器"""
        if not hasattr(self, '_initialized'):
            self._config: Optional[ShadowLabConfig] = None
            self._config_file: Optional[str] = None
            self._initialized = True

    def load_config(
        self,
        config_path: Optional[str] = None,
        config_dict: Optional[Dict[str, Any]] = None,
        **kwargs
    ) -> ShadowLabConfig:
        """
        加载配置，优先级：kwargs > 环境变量 > config_dict > 配置文件 > 配方 > 默认值

        任一层给出 recipe 时，以该配方为基础再叠加各层。
        """
        layers = []

        # 1. 配置文件
        effective_config_path = config_path
        if effective_config_path is None:
            for candidate in ('shadowlab.yaml', 'shadowlab.yml', 'shadowlab.json'):
                if Path(candidate).exists():
                    effective_config_path = candidate
                    break
        if effective_config_path:
            layers.append(expand_dotted(self._load_from_file(effective_config_path)))
            self._config_file = str(effective_config_path)

        # 2. 字典
        if config_dict:
            layers.append(expand_dotted(config_dict))

        # 3. 环境变量
        layers.append(self._load_from_env())

        # 4. 关键字参数（最高优先级）
        if kwargs:
            layers.append(expand_dotted(kwargs))

        config_data: Dict[str, Any] = {}
        for layer in layers:
            config_data = deep_merge(config_data, layer)

        # 5. 创建配置对象
        self._config = self._create_config(config_data)

        logger.info(f"配置加载完成: {self._config.project_name} v{self._config.version}, 实验 {self._config.experiment}")
        return self._config

    def save_config(self, config_path: Optional[str] = None) -> None:
        """
        保存配置到文件

        Args:
            config_path: 配置文件路径
        """
        if not self._config:
            raise ValueError("没有配置可以保存")

        save_path = config_path or self._config_file
        if not save_path:
            raise ValueError("没有指定保存路径")

        self._save_to_file(self._config, save_path)
        logger.info(f"配置已保存到: {save_path}")

    def get_config(self) -> Optional[ShadowLabConfig]:
        """获取当前配置"""
        return self._config

    def update_config(self, **kwargs) -> None:
        """
        更新配置

        Args:
            **kwargs: 要更新的配置项，支持点分键
        """
        if not self._config:
            raise ValueError("没有配置可以更新")

        config_dict = deep_merge(self._config.to_dict(), expand_dotted(kwargs))
        self._config = self._create_config(config_dict)
        logger.info("配置已更新")

    def reset(self) -> None:
        """清除当前配置"""
        self._config = None
        self._config_file = None

    def _load_from_file(self, config_path: str) -> Dict[str, Any]:
        """
        从文件加载配置

        Raises:
            ConfigurationError: 文件不存在或无法解析
        """
        config_path = Path(config_path)

        if not config_path.exists():
            raise ConfigurationError(f"配置文件不存在: {config_path}")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                if config_path.suffix.lower() == '.json':
                    data = json.load(f)
                else:
                    data = yaml.safe_load(f)
        except (OSError, ValueError, yaml.YAMLError) as e:
            raise ConfigurationError(f"加载配置文件失败: {config_path}: {e}") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"配置文件顶层必须是映射: {config_path}")
        return data

    def _save_to_file(self, config: ShadowLabConfig, config_path: str) -> None:
        """保存配置到文件"""
        config_path = Path(config_path)
        config_path.parent.mkdir(parents=True, exist_ok=True)

        config_dict = config.to_dict()

        try:
            with open(config_path, 'w', encoding='utf-8') as f:
                if config_path.suffix.lower() == '.json':
                    json.dump(config_dict, f, indent=2, ensure_ascii=False, sort_keys=True)
                else:
                    yaml.safe_dump(config_dict, f, default_flow_style=False, allow_unicode=True)
        except Exception as e:
            logger.error(f"保存配置文件失败: {e}")
            raise

    def _load_from_env(self) -> Dict[str, Any]:
        """
        从环境变量加载配置

        SHADOWLAB_TRACING__EPSILON=0.05 对应 tracing.epsilon；取值按 YAML 解析类型。
        """
        config: Dict[str, Any] = {}
        for name in sorted(os.environ):
            if not name.startswith(ENV_PREFIX):
                continue
            path = name[len(ENV_PREFIX):].lower().split(ENV_SEPARATOR)
            if not all(path):
                continue
            try:
                value = yaml.safe_load(os.environ[name])
            except yaml.YAMLError:
                value = os.environ[name]
            node = config
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = value
        return config

    def _create_config(self, config_data: Dict[str, Any]) -> ShadowLabConfig:
        """从字典创建并校验配置对象"""
        from .defaults import DEFAULT_CONFIG, get_recipe

        recipe = config_data.get('recipe')
        base = get_recipe(recipe).to_dict() if recipe else DEFAULT_CONFIG.to_dict()
        config = ShadowLabConfig.from_dict(deep_merge(base, config_data))
        return config.validate()


# 全局配置管理器实例
_config_manager = None


def get_config_manager() -> ConfigManager:
    """获取全局配置管理器实例"""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def load_config(
    config_path: Optional[str] = None,
    config_dict: Optional[Dict[str, Any]] = None,
    **kwargs
) -> ShadowLabConfig:
    """
    加载配置的便利函数

    Args:
        config_path: 配置文件路径
        config_dict: 配置字典
        **kwargs: 额外配置参数

    Returns:
        配置对象
    """
    return get_config_manager().load_config(config_path, config_dict, **kwargs)


def save_config(config_path: Optional[str] = None) -> None:
    """
    保存配置的便利函数

    Args:
        config_path: 配置文件路径
    """
    get_config_manager().save_config(config_path)


def get_current_config() -> Optional[ShadowLabConfig]:
    """获取当前配置"""
    return get_config_manager().get_config()


def update_config(**kwargs) -> None:
    """
    更新配置的便利函数

    Args:
        **kwargs: 要更新的配置项
    """
    get_config_manager().update_config(**kwargs)
