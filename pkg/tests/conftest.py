import os
import sys

import numpy as np
import pytest
from loguru import logger

from shadowlab.config import get_config_manager
from shadowlab.models import limit_cycle, linear, lorenz, saddle

# 测试中只显示 WARNING 及以上级别的日志
logger.remove()
logger.add(sys.stderr, level="WARNING")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    """隔离环境变量、工作目录与全局配置管理器"""
    for name in list(os.environ):
        if name.startswith("SHADOWLAB_"):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    get_config_manager().reset()
    yield
    get_config_manager().reset()


@pytest.fixture(scope="session")
def saddle_spec():
    return saddle()


@pytest.fixture(scope="session")
def lorenz_spec():
    return lorenz()


@pytest.fixture(scope="session")
def cycle_spec():
    return limit_cycle(1.0)


@pytest.fixture(scope="session")
def expanding_spec():
    """diag(1, 3, −1)：中心平面面积增长率为 4"""
    return linear(np.diag([1.0, 3.0, -1.0]))


@pytest.fixture
def x0():
    return np.array([0.5, 0.5, 0.1])
