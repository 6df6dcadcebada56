# -*- coding: utf-8 -*-
"""
===================================
StyleSync 风格同步仿真 - 运行配置
===================================

职责：
1. 读取单个 JSON 运行配置，映射为不可变数据类
2. 拒绝任何层级的未知键；所有校验在开始计算前完成
3. 合并命令行覆盖项（--seed / --out / --policies / --windows / --closed-loop / --jobs）
4. 计算配置哈希（规范 JSON 的 SHA-256 前 12 位），写入每个输出文件的头部

JSON 结构示例见 README.md。
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from src.enums import CorpusFormat, FitSource, GeneratorMode, PersonaAnchor, PolicyKind
from src.errors import ConfigError, PolicyError
from src.metrics import SESSION_METRICS
from src.policies import PolicyConfig
from src.promptgen import DEFAULT_BASE_PROMPT, DEFAULT_THRESHOLD
from src.stats import DEFAULT_ALPHA, DEFAULT_RESAMPLES, DEFAULT_SESOI

logger = logging.getLogger(__name__)

DEFAULT_CLOSED_LOOP_POLICIES = ("uncapped", "hybrid")
ARCHETYPE_DEFAULT = "default"
ARCHETYPE_FITTED = "fitted"


def _check_keys(data: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _enum(enum_cls, value: Any, where: str):
    try:
        return enum_cls.from_str(value)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _optional(value: Any, cast):
    return None if value is None else cast(value)


def _metrics(values: Optional[Sequence[str]], where: str) -> Tuple[str, ...]:
    if values is None:
        return SESSION_METRICS
    bad = [m for m in values if m not in SESSION_METRICS]
    if bad:
        raise ConfigError(f"{where}: unknown metric(s) {', '.join(bad)}")
    return tuple(values)


def parse_policy(item: Union[str, Mapping[str, Any]], where: str = "policies") -> PolicyConfig:
    """策略既可写成 kind 字符串，也可写成带超参数的对象"""
    if isinstance(item, str):
        item = {"kind": item}
    _check_keys(item, ("kind", "kappa", "alpha", "epsilon", "rho", "label"), where)
    if "kind" not in item:
        raise ConfigError(f"{where}: missing 'kind'")
    kwargs = dict(item)
    kwargs["kind"] = _enum(PolicyKind, kwargs["kind"], where)
    try:
        for key in ("kappa", "alpha", "epsilon", "rho"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        return PolicyConfig(**kwargs)
    except (PolicyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def default_policies() -> Tuple[PolicyConfig, ...]:
    return tuple(PolicyConfig(kind) for kind in PolicyKind)


@dataclass(frozen=True)
class CorpusSpec:
    name: str
    path: str
    format: CorpusFormat = CorpusFormat.SESSION_JSONL

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str) -> "CorpusSpec":
        _check_keys(data, ("name", "path", "format"), where)
        if not data.get("path"):
            raise ConfigError(f"{where}: missing 'path'")
        fmt = _enum(CorpusFormat, data.get("format", CorpusFormat.SESSION_JSONL.value), where)
        name = data.get("name") or Path(data["path"]).stem
        return cls(name=str(name), path=str(data["path"]), format=fmt)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "path": self.path, "format": self.format.value}


@dataclass(frozen=True)
class PersonaSpec:
    """
    人设来源

    Attributes:
        path: 已保存的人设文件；为空时在每个语料上拟合
        fit_on: 拟合使用的话语范围
        archetype: "default"（随包合成原型）或 "fitted"（拟合语料原始均值）
        archetype_path: 自定义原型文件，优先于 archetype
        anchor: b_0 / Static 目标 / 半径中心
    """
    path: Optional[str] = None
    fit_on: FitSource = FitSource.BOT
    archetype: str = ARCHETYPE_DEFAULT
    archetype_path: Optional[str] = None
    anchor: PersonaAnchor = PersonaAnchor.CENTROID

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PersonaSpec":
        _check_keys(data, ("path", "fit_on", "archetype", "archetype_path", "anchor"), "persona")
        archetype = data.get("archetype", ARCHETYPE_DEFAULT)
        if archetype not in (ARCHETYPE_DEFAULT, ARCHETYPE_FITTED):
            raise ConfigError(f"persona.archetype must be '{ARCHETYPE_DEFAULT}' or '{ARCHETYPE_FITTED}'")
        return cls(
            path=data.get("path"),
            fit_on=_enum(FitSource, data.get("fit_on", FitSource.BOT.value), "persona.fit_on"),
            archetype=archetype,
            archetype_path=data.get("archetype_path"),
            anchor=_enum(PersonaAnchor, data.get("anchor", PersonaAnchor.CENTROID.value), "persona.anchor"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "path": self.path,
            "fit_on": self.fit_on.value,
            "archetype": self.archetype,
            "archetype_path": self.archetype_path,
            "anchor": self.anchor.value,
        }


@dataclass(frozen=True)
class BootstrapSpec:
    n_resamples: int = DEFAULT_RESAMPLES

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BootstrapSpec":
        _check_keys(data, ("n_resamples",), "bootstrap")
        n = int(data.get("n_resamples", DEFAULT_RESAMPLES))
        if n < 1:
            raise ConfigError(f"bootstrap.n_resamples must be ≥ 1, got {n}")
        return cls(n_resamples=n)

    def to_dict(self) -> Dict[str, Any]:
        return {"n_resamples": self.n_resamples}


@dataclass(frozen=True)
class TostSpec:
    sesoi: float = DEFAULT_SESOI
    alpha: float = DEFAULT_ALPHA
    paired: bool = False

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TostSpec":
        _check_keys(data, ("sesoi", "alpha", "paired"), "tost")
        spec = cls(
            sesoi=float(data.get("sesoi", DEFAULT_SESOI)),
            alpha=float(data.get("alpha", DEFAULT_ALPHA)),
            paired=bool(data.get("paired", False)),
        )
        if spec.sesoi < 0:
            raise ConfigError(f"tost.sesoi must be ≥ 0, got {spec.sesoi}")
        if not 0.0 < spec.alpha < 1.0:
            raise ConfigError(f"tost.alpha must be in (0, 1), got {spec.alpha}")
        return spec

    def to_dict(self) -> Dict[str, Any]:
        return {"sesoi": self.sesoi, "alpha": self.alpha, "paired": self.paired}


@dataclass(frozen=True)
class ComparisonSpec:
    """treatment − baseline 的逐参与者比较"""
    baseline: str
    treatment: str
    metrics: Tuple[str, ...] = SESSION_METRICS

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str) -> "ComparisonSpec":
        _check_keys(data, ("baseline", "treatment", "metrics"), where)
        if not data.get("baseline") or not data.get("treatment"):
            raise ConfigError(f"{where}: 'baseline' and 'treatment' are required")
        return cls(
            baseline=str(data["baseline"]),
            treatment=str(data["treatment"]),
            metrics=_metrics(data.get("metrics"), where),
        )

    @property
    def name(self) -> str:
        return f"{self.treatment}_vs_{self.baseline}"

    def to_dict(self) -> Dict[str, Any]:
        return {"baseline": self.baseline, "treatment": self.treatment, "metrics": list(self.metrics)}


@dataclass(frozen=True)
class ValidationSpec:
    """观测队列（逐参与者均值 CSV）与回放策略的等价性检验"""
    observed_path: str
    policy: str
    corpus: Optional[str] = None
    metrics: Tuple[str, ...] = ("synchrony", "stability")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ValidationSpec":
        _check_keys(data, ("observed_path", "policy", "corpus", "metrics"), "validation")
        if not data.get("observed_path") or not data.get("policy"):
            raise ConfigError("validation: 'observed_path' and 'policy' are required")
        return cls(
            observed_path=str(data["observed_path"]),
            policy=str(data["policy"]),
            corpus=data.get("corpus"),
            metrics=_metrics(data.get("metrics", ["synchrony", "stability"]), "validation"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "observed_path": self.observed_path,
            "policy": self.policy,
            "corpus": self.corpus,
            "metrics": list(self.metrics),
        }


@dataclass(frozen=True)
class ClosedLoopSpec:
    """max_reply_tokens / temperature 为 None 时取 GENERATOR_MAX_TOKENS / GENERATOR_TEMPERATURE"""
    generators: Tuple[GeneratorMode, ...] = (GeneratorMode.ECHO,)
    policies: Tuple[PolicyConfig, ...] = ()
    max_sessions: int = 25
    max_in_flight: int = 4
    max_reply_tokens: Optional[int] = None
    temperature: Optional[float] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClosedLoopSpec":
        _check_keys(
            data,
            ("generators", "policies", "max_sessions", "max_in_flight", "max_reply_tokens", "temperature"),
            "closed_loop",
        )
        generators = tuple(
            _enum(GeneratorMode, g, "closed_loop.generators") for g in data.get("generators", ["echo"])
        )
        if not generators:
            raise ConfigError("closed_loop.generators must not be empty")
        policies = tuple(
            parse_policy(p, "closed_loop.policies")
            for p in data.get("policies", list(DEFAULT_CLOSED_LOOP_POLICIES))
        )
        spec = cls(
            generators=generators,
            policies=policies,
            max_sessions=int(data.get("max_sessions", 25)),
            max_in_flight=int(data.get("max_in_flight", 4)),
            max_reply_tokens=_optional(data.get("max_reply_tokens"), int),
            temperature=_optional(data.get("temperature"), float),
        )
        for key in ("max_sessions", "max_in_flight", "max_reply_tokens"):
            value = getattr(spec, key)
            if value is not None and value < 1:
                raise ConfigError(f"closed_loop.{key} must be ≥ 1")
        if spec.temperature is not None and not 0.0 <= spec.temperature <= 2.0:
            raise ConfigError(f"closed_loop.temperature must be in [0, 2], got {spec.temperature}")
        return spec

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generators": [g.value for g in self.generators],
            "policies": [p.to_dict() for p in self.policies],
            "max_sessions": self.max_sessions,
            "max_in_flight": self.max_in_flight,
            "max_reply_tokens": self.max_reply_tokens,
            "temperature": self.temperature,
        }


TOP_LEVEL_KEYS = (
    "corpora", "persona", "policies", "seed", "output_dir", "windows", "thresholds", "base_prompt",
    "bootstrap", "tost", "comparisons", "validation", "closed_loop", "lsm_validation", "jobs",
)


@dataclass(frozen=True)
class RunConfig:
    """
    单次运行的全部语义配置

    thresholds 为标量或 8 个逐维度阈值。
    """
    corpora: Tuple[CorpusSpec, ...] = ()
    persona: PersonaSpec = field(default_factory=PersonaSpec)
    policies: Tuple[PolicyConfig, ...] = field(default_factory=default_policies)
    seed: int = 0
    output_dir: str = "./out"
    windows: Tuple[int, ...] = ()
    thresholds: Union[float, Tuple[float, ...]] = DEFAULT_THRESHOLD
    base_prompt: str = DEFAULT_BASE_PROMPT
    bootstrap: BootstrapSpec = field(default_factory=BootstrapSpec)
    tost: TostSpec = field(default_factory=TostSpec)
    comparisons: Tuple[ComparisonSpec, ...] = ()
    validation: Optional[ValidationSpec] = None
    closed_loop: Optional[ClosedLoopSpec] = None
    lsm_validation: bool = True
    jobs: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        _check_keys(data, TOP_LEVEL_KEYS, "config")
        corpora = tuple(
            CorpusSpec.from_dict(c, f"corpora[{i}]") for i, c in enumerate(data.get("corpora", []))
        )
        policies = (
            tuple(parse_policy(p, f"policies[{i}]") for i, p in enumerate(data["policies"]))
            if "policies" in data else default_policies()
        )
        thresholds = data.get("thresholds", DEFAULT_THRESHOLD)
        thresholds = float(thresholds) if not isinstance(thresholds, list) else tuple(float(t) for t in thresholds)

        config = cls(
            corpora=corpora,
            persona=PersonaSpec.from_dict(data.get("persona", {})),
            policies=policies,
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "./out")),
            windows=tuple(int(k) for k in data.get("windows", [])),
            thresholds=thresholds,
            base_prompt=str(data.get("base_prompt", DEFAULT_BASE_PROMPT)),
            bootstrap=BootstrapSpec.from_dict(data.get("bootstrap", {})),
            tost=TostSpec.from_dict(data.get("tost", {})),
            comparisons=tuple(
                ComparisonSpec.from_dict(c, f"comparisons[{i}]") for i, c in enumerate(data.get("comparisons", []))
            ),
            validation=ValidationSpec.from_dict(data["validation"]) if data.get("validation") else None,
            closed_loop=ClosedLoopSpec.from_dict(data["closed_loop"]) if data.get("closed_loop") else None,
            lsm_validation=bool(data.get("lsm_validation", True)),
            jobs=int(data["jobs"]) if data.get("jobs") is not None else None,
        )
        config.validate()
        return config

    def validate(self) -> None:
        """
        Raises:
            ConfigError: 语义不一致
        """
        if not self.policies:
            raise ConfigError("policies must not be empty")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy labels must be unique: {labels}")
        names = [c.name for c in self.corpora]
        if len(set(names)) != len(names):
            raise ConfigError(f"corpus names must be unique: {names}")
        if any(k < 1 for k in self.windows):
            raise ConfigError(f"windows must be ≥ 1: {list(self.windows)}")
        if isinstance(self.thresholds, tuple):
            if len(self.thresholds) != 8:
                raise ConfigError("thresholds must be a number or a list of 8 numbers")
            if any(t < 0 for t in self.thresholds):
                raise ConfigError("thresholds must be ≥ 0")
        elif self.thresholds < 0:
            raise ConfigError("thresholds must be ≥ 0")
        if not self.base_prompt.strip():
            raise ConfigError("base_prompt must not be empty")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be ≥ 1, got {self.jobs}")
        for comp in self.comparisons:
            for label in (comp.baseline, comp.treatment):
                if label not in labels:
                    raise ConfigError(f"comparison {comp.name}: unknown policy '{label}'")
        if self.validation:
            if self.validation.policy not in labels:
                raise ConfigError(f"validation: unknown policy '{self.validation.policy}'")
            if self.validation.corpus and self.validation.corpus not in names:
                raise ConfigError(f"validation: unknown corpus '{self.validation.corpus}'")

    def with_overrides(
        self,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
        policies: Optional[str] = None,
        windows: Optional[str] = None,
        closed_loop: Optional[str] = None,
        jobs: Optional[int] = None,
    ) -> "RunConfig":
        """
        应用命令行覆盖项并重新校验

        Args:
            policies: 逗号分隔的 kind 列表，如 "static,uncapped"
            windows: 逗号分隔的窗口大小，如 "1,3,5,8"
            closed_loop: 逗号分隔的生成器列表；开启闭环模式
        """
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = output_dir
        if policies:
            changes["policies"] = tuple(parse_policy(p.strip(), "--policies") for p in policies.split(",") if p.strip())
        if windows:
            try:
                changes["windows"] = tuple(int(k) for k in windows.split(",") if k.strip())
            except ValueError as e:
                raise ConfigError(f"--windows: {e}") from e
        if closed_loop:
            generators = tuple(
                _enum(GeneratorMode, g.strip(), "--closed-loop") for g in closed_loop.split(",") if g.strip()
            )
            base = self.closed_loop or ClosedLoopSpec.from_dict({})
            changes["closed_loop"] = replace(base, generators=generators)
        if jobs is not None:
            changes["jobs"] = int(jobs)
        if not changes:
            return self
        updated = replace(self, **changes)
        updated.validate()
        return updated

    def to_dict(self) -> Dict[str, Any]:
        return {
            "corpora": [c.to_dict() for c in self.corpora],
            "persona": self.persona.to_dict(),
            "policies": [p.to_dict() for p in self.policies],
            "seed": self.seed,
            "output_dir": self.output_dir,
            "windows": list(self.windows),
            "thresholds": list(self.thresholds) if isinstance(self.thresholds, tuple) else self.thresholds,
            "base_prompt": self.base_prompt,
            "bootstrap": self.bootstrap.to_dict(),
            "tost": self.tost.to_dict(),
            "comparisons": [c.to_dict() for c in self.comparisons],
            "validation": self.validation.to_dict() if self.validation else None,
            "closed_loop": self.closed_loop.to_dict() if self.closed_loop else None,
            "lsm_validation": self.lsm_validation,
            "jobs": self.jobs,
        }

    @property
    def config_hash(self) -> str:
        """规范 JSON（键排序、无空白）的 SHA-256 前 12 位；jobs 与输出目录不影响结果，不参与哈希"""
        payload = self.to_dict()
        payload.pop("jobs")
        payload.pop("output_dir")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    读取运行配置；path 为空时返回默认配置

    Raises:
        ConfigError: 文件不存在、JSON 非法或校验失败
    """
    if path is None:
        return RunConfig()
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {config_path}: {e}") from e
    try:
        config = RunConfig.from_dict(data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in {config_path}: {e}") from e
    logger.info(f"[Config] 已加载运行配置 {config_path}（hash={config.config_hash}）")
    return config
