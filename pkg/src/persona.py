# -*- coding: utf-8 -*-
"""
===================================
人设模型：标准化器 / 人设质心 / 助手原型
===================================

职责：
1. 在语料上拟合逐特征标准化器（均值 + 总体标准差）
2. 计算人设质心 b_c（标准化后向量的均值）
3. 将固定的助手原型映射到各语料的 z 空间，作为一致性锚点
4. PersonaModel 的 JSON 持久化

标准化后的风格向量在全项目中统一用形状为 (8,) 的 numpy 数组表示。
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from src.enums import PersonaAnchor
from src.errors import PersonaError, TextFeatureError
from src.lexicon import DATA_DIR
from src.textfeat import FEATURE_NAMES, N_FEATURES, RawStyleVector

logger = logging.getLogger(__name__)

# 标准差低于该值视为零方差，替换为 1.0
ZERO_VARIANCE_EPS = 1e-9

DEFAULT_ARCHETYPE_PATH = DATA_DIR / "default_archetype.json"

RawLike = Union[RawStyleVector, Sequence[float], np.ndarray]


def _as_raw_array(v: RawLike) -> np.ndarray:
    if isinstance(v, RawStyleVector):
        return v.to_array()
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (N_FEATURES,):
        raise PersonaError(f"style vector must have shape ({N_FEATURES},), got {arr.shape}")
    return arr


def _as_raw_matrix(raw_vectors: Sequence[RawLike]) -> np.ndarray:
    if isinstance(raw_vectors, np.ndarray):
        if raw_vectors.ndim != 2 or raw_vectors.shape[1] != N_FEATURES:
            raise PersonaError(f"expected an (n, {N_FEATURES}) matrix, got {raw_vectors.shape}")
        return raw_vectors.astype(np.float64, copy=False)
    return np.vstack([_as_raw_array(v) for v in raw_vectors])


@dataclass(frozen=True)
class FeatureScaler:
    """
    逐特征 z-score 标准化器

    Attributes:
        means: 8 个特征均值
        stds: 8 个总体标准差（零方差列已替换为 1.0）
        fitted_on: 拟合语料标识
        n_samples: 拟合样本数
    """
    means: tuple
    stds: tuple
    fitted_on: str
    n_samples: int

    @property
    def mean_array(self) -> np.ndarray:
        return np.asarray(self.means, dtype=np.float64)

    @property
    def std_array(self) -> np.ndarray:
        return np.asarray(self.stds, dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "means": list(self.means),
            "stds": list(self.stds),
            "fitted_on": self.fitted_on,
            "n_samples": self.n_samples,
        }


def fit_scaler(raw_vectors: Sequence[RawLike], fitted_on: str = "") -> FeatureScaler:
    """
    拟合标准化器

    Raises:
        PersonaError: 输入为空（"no fitting data"）
    """
    if raw_vectors is None or len(raw_vectors) == 0:
        raise PersonaError("no fitting data")

    matrix = _as_raw_matrix(raw_vectors)
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0, ddof=0)

    degenerate = stds < ZERO_VARIANCE_EPS
    if degenerate.any():
        names = [FEATURE_NAMES[i] for i in np.flatnonzero(degenerate)]
        logger.debug(f"[Persona] 零方差特征使用 std=1.0: {names}")
    stds = np.where(degenerate, 1.0, stds)

    return FeatureScaler(
        means=tuple(float(x) for x in means),
        stds=tuple(float(x) for x in stds),
        fitted_on=fitted_on,
        n_samples=int(matrix.shape[0]),
    )


def standardize(v: RawLike, scaler: FeatureScaler) -> np.ndarray:
    """z[i] = (v[i] − means[i]) / stds[i]"""
    return (_as_raw_array(v) - scaler.mean_array) / scaler.std_array


def standardize_matrix(raw_vectors: Sequence[RawLike], scaler: FeatureScaler) -> np.ndarray:
    """批量标准化，返回 (n, 8)"""
    if len(raw_vectors) == 0:
        return np.empty((0, N_FEATURES), dtype=np.float64)
    return (_as_raw_matrix(raw_vectors) - scaler.mean_array) / scaler.std_array


def inverse_transform(z: Sequence[float], scaler: FeatureScaler) -> np.ndarray:
    """z·std + mean，回到原始特征空间"""
    return np.asarray(z, dtype=np.float64) * scaler.std_array + scaler.mean_array


def compute_centroid(raw_vectors: Sequence[RawLike], scaler: FeatureScaler) -> np.ndarray:
    """标准化后向量的逐分量均值"""
    if raw_vectors is None or len(raw_vectors) == 0:
        raise PersonaError("no fitting data")
    return standardize_matrix(raw_vectors, scaler).mean(axis=0)


def standardize_archetype(raw_archetype: RawLike, scaler: FeatureScaler) -> np.ndarray:
    """用目标语料的标准化器把助手原型映射到该语料的 z 空间"""
    return standardize(raw_archetype, scaler)


def load_archetype(path: Optional[Union[str, Path]] = None) -> RawStyleVector:
    """
    读取原型文件（特征名 -> 数值的 JSON 对象），默认读取随包发布的合成原型

    Raises:
        PersonaError: 文件不存在或内容不合法
    """
    archetype_path = Path(path) if path else DEFAULT_ARCHETYPE_PATH
    if not archetype_path.exists():
        raise PersonaError(f"archetype file not found: {archetype_path}")
    try:
        data = json.loads(archetype_path.read_text(encoding="utf-8"))
        return RawStyleVector.from_dict(data)
    except (json.JSONDecodeError, TextFeatureError, TypeError, ValueError) as e:
        raise PersonaError(f"invalid archetype file {archetype_path}: {e}") from e


@dataclass(frozen=True)
class PersonaModel:
    """
    某个语料上的人设模型

    centroid 与 archetype_z 均位于该语料的 z 空间；一致性始终以 archetype_z 为锚点。
    """
    scaler: FeatureScaler
    centroid: tuple
    raw_archetype: RawStyleVector

    @property
    def centroid_z(self) -> np.ndarray:
        return np.asarray(self.centroid, dtype=np.float64)

    @property
    def archetype_z(self) -> np.ndarray:
        return standardize_archetype(self.raw_archetype, self.scaler)

    def anchor(self, which: PersonaAnchor = PersonaAnchor.CENTROID) -> np.ndarray:
        """初始状态 b_0 / Static 目标 / 半径中心"""
        if which is PersonaAnchor.ARCHETYPE:
            return self.archetype_z
        return self.centroid_z

    def standardize(self, v: RawLike) -> np.ndarray:
        return standardize(v, self.scaler)

    def inverse_transform(self, z: Sequence[float]) -> np.ndarray:
        return inverse_transform(z, self.scaler)

    # === 持久化 ===

    def to_dict(self) -> Dict[str, Any]:
        return {
            "means": list(self.scaler.means),
            "stds": list(self.scaler.stds),
            "centroid": list(self.centroid),
            "raw_archetype": [float(x) for x in self.raw_archetype.to_array()],
            "fitted_on": self.scaler.fitted_on,
            "n_samples": self.scaler.n_samples,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PersonaModel":
        required = ("means", "stds", "centroid", "raw_archetype", "fitted_on", "n_samples")
        missing = [k for k in required if k not in data]
        if missing:
            raise PersonaError(f"persona document missing fields: {missing}")

        vectors = {}
        for key in ("means", "stds", "centroid", "raw_archetype"):
            values = data[key]
            if not isinstance(values, list) or len(values) != N_FEATURES:
                raise PersonaError(f"persona field '{key}' must be a list of {N_FEATURES} numbers")
            vectors[key] = tuple(float(x) for x in values)

        if any(s <= 0 for s in vectors["stds"]):
            raise PersonaError("persona stds must be positive")
        n_samples = int(data["n_samples"])
        if n_samples < 1:
            raise PersonaError("persona n_samples must be ≥ 1")

        scaler = FeatureScaler(
            means=vectors["means"],
            stds=vectors["stds"],
            fitted_on=str(data["fitted_on"]),
            n_samples=n_samples,
        )
        return cls(
            scaler=scaler,
            centroid=vectors["centroid"],
            raw_archetype=RawStyleVector(*vectors["raw_archetype"]),
        )

    def to_json(self) -> str:
        # repr 精度的浮点数保证往返逐位一致
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.to_json(), encoding="utf-8")
        logger.info(f"[Persona] 人设模型已保存: {target} (n_samples={self.scaler.n_samples})")
        return target

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PersonaModel":
        source = Path(path)
        if not source.exists():
            raise PersonaError(f"persona file not found: {source}")
        try:
            data = json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise PersonaError(f"invalid persona file {source}: {e}") from e
        return cls.from_dict(data)


def fit_persona(
    raw_vectors: Sequence[RawLike],
    fitted_on: str,
    raw_archetype: Optional[RawStyleVector] = None,
) -> PersonaModel:
    """
    拟合标准化器并计算人设质心

    Args:
        raw_vectors: 拟合语料的原始风格向量
        fitted_on: 语料标识
        raw_archetype: 助手原型；为 None 时使用拟合语料的原始均值
    """
    scaler = fit_scaler(raw_vectors, fitted_on=fitted_on)
    centroid = compute_centroid(raw_vectors, scaler)
    if raw_archetype is None:
        raw_archetype = RawStyleVector.from_array(scaler.mean_array)

    logger.info(f"[Persona] {fitted_on}: 拟合完成 n_samples={scaler.n_samples}")
    return PersonaModel(
        scaler=scaler,
        centroid=tuple(float(x) for x in centroid),
        raw_archetype=raw_archetype,
    )
