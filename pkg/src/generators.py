# -*- coding: utf-8 -*-
"""
===================================
闭环回放 - 文本生成器
===================================

设计模式：策略模式 (Strategy Pattern)
- BaseGenerator: 抽象基类，统一的同步调用约定 generate(request) -> response
- EchoGenerator / FixedGenerator / StyledGenerator: 确定性本地 stub，测试不依赖网络
- RemoteGenerator: OpenAI 兼容 chat completions 接口

远程调用策略：
1. 限流 / 服务不可用时指数退避重试（tenacity）
2. 重试耗尽后抛出 GeneratorError，由闭环流程把会话标记为 incomplete
"""

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from tenacity import (
    RetryError,
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from src.config import Config, get_config
from src.enums import Direction, GeneratorMode
from src.errors import StyleSyncError
from src.promptgen import FragmentTable, load_fragment_table

logger = logging.getLogger(__name__)

DEFAULT_MAX_REPLY_TOKENS = 256
DEFAULT_FIXED_REPLY = "Thank you for your message. I will do my best to help."


class GeneratorError(StyleSyncError):
    """生成器调用异常基类"""
    pass


class RateLimitError(GeneratorError):
    """生成器限流 (HTTP 429)"""
    pass


class GeneratorUnavailableError(GeneratorError):
    """网络错误、超时或 5xx"""
    pass


@dataclass(frozen=True)
class GeneratorRequest:
    """
    单次生成请求

    Attributes:
        system_prompt: ComposedPrompt.full_text
        history: 按时间顺序的 (role, text)，role 为 "user" / "assistant"
        max_reply_tokens: 回复 token 上限
    """
    system_prompt: str
    history: Tuple[Tuple[str, str], ...] = ()
    max_reply_tokens: int = DEFAULT_MAX_REPLY_TOKENS

    @property
    def last_user_text(self) -> str:
        for role, text in reversed(self.history):
            if role == "user":
                return text
        return ""

    def to_messages(self) -> List[Dict[str, str]]:
        messages = [{"role": "system", "content": self.system_prompt}]
        messages.extend({"role": role, "content": text} for role, text in self.history)
        return messages


@dataclass(frozen=True)
class GeneratorResponse:
    text: str
    latency_ms: int
    provider_tag: str
    refused: bool = False


class BaseGenerator(ABC):
    """
    生成器抽象基类

    子类只需实现 _generate()；计时与日志由 generate() 统一处理。
    """

    name: str = "BaseGenerator"
    mode: GeneratorMode = GeneratorMode.ECHO

    @abstractmethod
    def _generate(self, request: GeneratorRequest) -> str:
        """返回回复文本（子类必须实现）"""
        pass

    @property
    def provider_tag(self) -> str:
        return self.mode.value

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        start = time.perf_counter()
        text = self._generate(request)
        latency_ms = int(round((time.perf_counter() - start) * 1000))
        refused = not text or not text.strip()
        logger.debug(f"[Generator:{self.provider_tag}] {latency_ms} ms, {len(text or '')} 字符")
        return GeneratorResponse(text=text or "", latency_ms=latency_ms, provider_tag=self.provider_tag, refused=refused)


class EchoGenerator(BaseGenerator):
    """原样回显最近一条用户话语"""

    name = "EchoGenerator"
    mode = GeneratorMode.ECHO

    def _generate(self, request: GeneratorRequest) -> str:
        return request.last_user_text


class FixedGenerator(BaseGenerator):
    """始终返回同一句回复"""

    name = "FixedGenerator"
    mode = GeneratorMode.FIXED

    def __init__(self, reply: str = DEFAULT_FIXED_REPLY):
        self.reply = reply

    def _generate(self, request: GeneratorRequest) -> str:
        return self.reply


# (维度, 方向) -> 该指令下 StyledGenerator 产出的句子
STYLED_PHRASES: Dict[Tuple[int, Direction], str] = {
    (0, Direction.HIGH): "lol ok u got it!! gonna keep it chill haha",
    (0, Direction.LOW): "Certainly. I shall address your request with appropriate care.",
    (1, Direction.HIGH): "That sounds wonderful and I am happy to help!",
    (1, Direction.LOW): "Noted.",
    (2, Direction.HIGH): (
        "I would like to take a moment to walk through this carefully and consider each of the points "
        "you raised along with the way they connect to one another."
    ),
    (2, Direction.LOW): "Sure. Done.",
    (3, Direction.HIGH): "It is easy. We can do it now.",
    (3, Direction.LOW): "Comprehensive methodological considerations necessitate systematic evaluation.",
    (4, Direction.HIGH): "We are in this together, you and me and our friends.",
    (4, Direction.LOW): "The requested output follows.",
    (5, Direction.HIGH): "I think we should consider why this happens, because perhaps it depends.",
    (5, Direction.LOW): "Here is the answer.",
    (6, Direction.HIGH): "I love this and I feel so glad, though I was worried before.",
    (6, Direction.LOW): "Proceeding as requested.",
    (7, Direction.HIGH): "It is what it is and we can go with it from here.",
    (7, Direction.LOW): "Parameters configured. Output generated. Results attached.",
}
NEUTRAL_STYLED_REPLY = "Okay, here is my reply to your message."


class StyledGenerator(BaseGenerator):
    """
    按提示词中出现的指令片段改写模板

    在 system_prompt 中查找片段表的每条文本，命中的片段按维度顺序各贡献一句；
    没有命中任何片段时返回中性回复。用于端到端验证 提示词 -> 风格 的因果链路。
    """

    name = "StyledGenerator"
    mode = GeneratorMode.STYLED

    def __init__(self, table: Optional[FragmentTable] = None, phrases: Optional[Dict[Tuple[int, Direction], str]] = None):
        self.table = table or load_fragment_table()
        self.phrases = phrases or STYLED_PHRASES

    def active_fragments(self, system_prompt: str) -> List[Tuple[int, Direction]]:
        lines = {line.strip() for line in system_prompt.splitlines()}
        return sorted(
            (f.dimension, f.direction)
            for f in self.table.fragments
            if f.text in lines
        )

    def _generate(self, request: GeneratorRequest) -> str:
        parts = [self.phrases[key] for key in self.active_fragments(request.system_prompt) if key in self.phrases]
        return " ".join(parts) if parts else NEUTRAL_STYLED_REPLY


class RemoteGenerator(BaseGenerator):
    """
    OpenAI 兼容 chat completions 生成器

    支持所有 OpenAI 格式的接口（OpenAI 官方、DeepSeek、本地 vLLM 等），
    通过 GENERATOR_URL / GENERATOR_KEY / GENERATOR_MODEL 配置。
    """

    name = "RemoteGenerator"
    mode = GeneratorMode.REMOTE

    def __init__(self, config: Optional[Config] = None, temperature: Optional[float] = None, client=None):
        self.config = config or get_config()
        self.model = self.config.generator_model
        self.temperature = self.config.generator_temperature if temperature is None else temperature
        self.max_attempts = max(1, self.config.generator_max_retries)
        self._client = client or self._init_client()

    @property
    def provider_tag(self) -> str:
        return f"remote:{self.model}"

    def _init_client(self):
        if not self.config.remote_generator_configured:
            raise GeneratorError("remote generator requires GENERATOR_URL and GENERATOR_KEY")

        # 分离 import 和客户端创建，以便提供更准确的错误信息
        try:
            from openai import OpenAI
        except ImportError as e:
            raise GeneratorError("未安装 openai 库，请运行: pip install openai") from e

        client_kwargs = {
            "api_key": self.config.generator_key,
            "base_url": self.config.generator_url,
            "timeout": self.config.generator_timeout,
            "max_retries": 0,  # 重试由 tenacity 负责
        }
        try:
            if self.config.http_proxy:
                import httpx
                client_kwargs["http_client"] = httpx.Client(proxy=self.config.http_proxy)
            client = OpenAI(**client_kwargs)
        except ImportError as e:
            if 'socks' in str(e).lower():
                raise GeneratorError("远程生成器需要 SOCKS 代理支持，请运行: pip install httpx[socks]") from e
            raise GeneratorError(f"远程生成器依赖缺失: {e}") from e

        logger.info(f"[Generator:remote] 初始化成功 (base_url: {self.config.generator_url}, model: {self.model})")
        return client

    def _complete(self, request: GeneratorRequest) -> str:
        import openai

        try:
            response = self._client.chat.completions.create(
                model=self.model,
                messages=request.to_messages(),
                temperature=self.temperature,
                max_tokens=request.max_reply_tokens,
            )
        except openai.RateLimitError as e:
            raise RateLimitError(str(e)[:200]) from e
        except (openai.APIConnectionError, openai.APITimeoutError, openai.InternalServerError) as e:
            raise GeneratorUnavailableError(str(e)[:200]) from e
        except openai.APIError as e:
            raise GeneratorError(str(e)[:200]) from e

        if not response or not response.choices:
            return ""
        return response.choices[0].message.content or ""

    def _generate(self, request: GeneratorRequest) -> str:
        retrying = Retrying(
            stop=stop_after_attempt(self.max_attempts),
            wait=wait_exponential(multiplier=1, min=2, max=30),
            retry=retry_if_exception_type((RateLimitError, GeneratorUnavailableError)),
            before_sleep=before_sleep_log(logger, logging.WARNING),
        )
        try:
            return retrying(self._complete, request)
        except RetryError as e:
            cause = e.last_attempt.exception()
            raise GeneratorError(f"generator failed after {self.max_attempts} attempts: {cause}") from cause


def stub_generator(mode: GeneratorMode, **kwargs) -> BaseGenerator:
    """
    确定性本地生成器

    Raises:
        GeneratorError: mode 不是本地 stub
    """
    mode = GeneratorMode.from_str(mode) if isinstance(mode, str) else mode
    if mode is GeneratorMode.ECHO:
        return EchoGenerator()
    if mode is GeneratorMode.FIXED:
        return FixedGenerator(**kwargs)
    if mode is GeneratorMode.STYLED:
        return StyledGenerator(**kwargs)
    raise GeneratorError(f"{mode.value} is not a local stub generator")


def create_generator(mode, config: Optional[Config] = None, temperature: Optional[float] = None) -> BaseGenerator:
    """按模式创建生成器；remote 读取环境配置"""
    mode = GeneratorMode.from_str(mode) if isinstance(mode, str) else mode
    if mode is GeneratorMode.REMOTE:
        return RemoteGenerator(config=config, temperature=temperature)
    return stub_generator(mode)


def history_from_pairs(pairs: Sequence[Tuple[str, str]], user_text: str) -> Tuple[Tuple[str, str], ...]:
    """已完成的 (用户, 机器人) 轮次加上当前用户话语，组成请求历史"""
    history: List[Tuple[str, str]] = []
    for user, bot in pairs:
        history.append(("user", user))
        history.append(("assistant", bot))
    history.append(("user", user_text))
    return tuple(history)
