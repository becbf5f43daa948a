"""
配置管理模块

提供统一的配置管理功能，支持配置文件、字典、环境变量与关键字参数。
"""

from .config_manager import (
    ENV_PREFIX,
    AttractorConfig,
    ChainConfig,
    ConfigManager,
    ExperimentConfig,
    GeometryConfig,
    GrowthConfig,
    IntegratorConfig,
    ModelConfig,
    OracleConfig,
    ShadowLabConfig,
    TracingConfig,
    deep_merge,
    expand_dotted,
    get_config_manager,
    get_current_config,
    load_config,
    save_config,
    update_config,
)

from .defaults import (
    DEFAULT_CONFIG,
    RECIPES,
    get_recipe,
)

__all__ = [
    # 配置管理器
    'ConfigManager',
    'get_config_manager',

    # 配置类
    'ShadowLabConfig',
    'ExperimentConfig',
    'ModelConfig',
    'IntegratorConfig',
    'AttractorConfig',
    'ChainConfig',
    'TracingConfig',
    'GeometryConfig',
    'GrowthConfig',
    'OracleConfig',

    # 配置函数
    'load_config',
    'save_config',
    'get_current_config',
    'update_config',
    'expand_dotted',
    'deep_merge',
    'ENV_PREFIX',

    # 默认配置
    'DEFAULT_CONFIG',
    'RECIPES',
    'get_recipe',
]
