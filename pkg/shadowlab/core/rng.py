"""
随机数流

所有随机性都来自一个种子：SeedSequence 派生子序列，Philox 计数器生成器产生样本。
子流由稳定的字符串键决定，与调用顺序和进程数无关。
"""

import hashlib
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

GENERATOR_NAME = "Philox"


def _key_words(key: str) -> List[int]:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


@dataclass
class SeedStream:
    """
    可拆分的随机数流

    Attributes:
        seed: 根种子
        keys: 已派生过的子流键（仅用于报告）
    """

    seed: int
    keys: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"种子必须非负: {self.seed}")

    def sequence(self, key: str) -> np.random.SeedSequence:
        """键 key 对应的子 SeedSequence"""
        return np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(_key_words(key)))

    def spawn(self, key: str) -> np.random.Generator:
        """键 key 对应的独立生成器；同一键总是得到同一序列"""
        if key not in self.keys:
            self.keys.append(key)
        return np.random.Generator(np.random.Philox(self.sequence(key)))

    def integer_seed(self, key: str) -> int:
        """给只接受整数种子的接口使用"""
        if key not in self.keys:
            self.keys.append(key)
        return int(self.sequence(key).generate_state(1, dtype=np.uint32)[0])

    def describe(self) -> Dict[str, Any]:
        return {"seed": int(self.seed), "generator": GENERATOR_NAME, "keys": sorted(self.keys)}
