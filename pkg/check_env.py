# -*- coding: utf-8 -*-
"""
===================================
StyleSync 风格同步仿真 - 环境验证
===================================

用于验证 .env 配置与随包数据是否可用，包括：
1. 配置加载
2. 随包词典 / 指令片段表 / 默认原型
3. 语料加载（可选，指定 --corpus）
4. 远程生成器调用（可选，--generator）

使用方法：
    python check_env.py                              # 配置 + 随包数据
    python check_env.py --corpus data/dd.jsonl       # 额外检查语料
    python check_env.py --generator                  # 额外发送一次生成请求
"""

import argparse
import logging
import sys
import time
from datetime import datetime
from typing import Dict, Optional

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s | %(levelname)-8s | %(message)s',
    datefmt='%H:%M:%S'
)
logger = logging.getLogger(__name__)


def print_header(title: str):
    print("\n" + "=" * 60)
    print(f"  {title}")
    print("=" * 60)


def print_section(title: str):
    print(f"\n--- {title} ---")


def check_config() -> bool:
    """配置加载"""
    print_header("1. 配置加载")

    from src.config import get_config
    config = get_config()

    print_section("基础配置")
    print(f"  日志目录: {config.log_dir}")
    print(f"  最大并发数: {config.max_workers}")
    print(f"  调试模式: {config.debug}")

    print_section("远程生成器")
    print(f"  GENERATOR_URL: {config.generator_url or '未配置 ✗'}")
    print(f"  GENERATOR_KEY: {'已配置 ✓' if config.generator_key else '未配置 ✗'}")
    if config.generator_key:
        print(f"    Key 前8位: {config.generator_key[:8]}...")
    print(f"  模型: {config.generator_model}  温度: {config.generator_temperature}")
    print(f"  超时: {config.generator_timeout}s  重试: {config.generator_max_retries}")

    print_section("配置验证")
    warnings = config.validate()
    if warnings:
        for w in warnings:
            print(f"  ⚠ {w}")
    else:
        print("  ✓ 所有配置项验证通过")
    return True


def check_bundled_data() -> bool:
    """随包数据"""
    print_header("2. 随包数据")

    from src.lexicon import load_lexicons
    from src.persona import load_archetype
    from src.promptgen import load_fragment_table

    lexicons = load_lexicons()
    print_section("词典")
    print(f"  {lexicons.summary()}")

    table = load_fragment_table()
    print_section(f"指令片段表 v{table.version}")
    print(f"  共 {len(table.fragments)} 条片段")

    archetype = load_archetype()
    print_section("默认原型（原始尺度）")
    print("  " + ", ".join(f"{v:.3f}" for v in archetype.to_array()))
    return True


def check_corpus(path: str, fmt: str = "session_jsonl") -> bool:
    """语料加载"""
    print_header(f"3. 语料加载: {path}")

    from corpus_provider import CorpusManager, filter_sessions

    try:
        result = CorpusManager().load(path, fmt)
    except Exception as e:
        print(f"  ✗ 加载失败: {e}")
        return False

    kept = filter_sessions(result.sessions)
    print(f"  ✓ 会话数: {len(result.sessions)}（通过过滤: {len(kept)}）")
    print(f"    被拒绝的行: {len(result.rejects)}")
    for reject in result.rejects[:5]:
        print(f"    第 {reject.line_no} 行: {reject.reason}")
    return bool(kept)


def check_generator() -> bool:
    """远程生成器调用"""
    print_header("4. 远程生成器调用")

    from src.config import get_config
    from src.generators import GeneratorError, GeneratorRequest, RemoteGenerator

    config = get_config()
    try:
        generator = RemoteGenerator(config=config)
    except GeneratorError as e:
        print(f"  ✗ 初始化失败: {e}")
        return False

    request = GeneratorRequest(
        system_prompt="You are a helpful assistant.\n\nUse casual, conversational language.",
        history=(("user", "hey, how's it going?"),),
        max_reply_tokens=64,
    )
    print(f"  正在调用 {config.generator_model}（超时: {config.generator_timeout}秒）...")
    start_time = time.time()
    try:
        response = generator.generate(request)
    except GeneratorError as e:
        print(f"\n  ✗ 调用失败 (耗时: {time.time() - start_time:.2f}秒)")
        print(f"  错误: {e}")
        return False

    print(f"\n  ✓ 调用成功 (耗时: {time.time() - start_time:.2f}秒)")
    print(f"  回复: {response.text[:120]}")
    if response.refused:
        print("  ⚠ 回复为空，闭环回放中会记为未完成")
    return not response.refused


def run_checks(corpus: Optional[str], fmt: str, generator: bool) -> bool:
    print("\n" + "=" * 60)
    print("  StyleSync 风格同步仿真 - 环境验证")
    print("  " + datetime.now().strftime('%Y-%m-%d %H:%M:%S'))
    print("=" * 60)

    results: Dict[str, bool] = {}
    checks = [("配置加载", check_config), ("随包数据", check_bundled_data)]
    if corpus:
        checks.append(("语料加载", lambda: check_corpus(corpus, fmt)))
    if generator:
        checks.append(("远程生成器", check_generator))

    for name, check in checks:
        try:
            results[name] = check()
        except Exception as e:
            print(f"  ✗ {name}失败: {e}")
            results[name] = False

    print_header("检查结果汇总")
    for name, passed in results.items():
        status = "✓ 通过" if passed else "✗ 失败"
        print(f"  {status}: {name}")
    return all(results.values())


def main() -> int:
    parser = argparse.ArgumentParser(description='StyleSync 环境验证')
    parser.add_argument('--corpus', type=str, default=None, help='检查指定语料文件')
    parser.add_argument('--format', type=str, default='session_jsonl', help='语料格式')
    parser.add_argument('--generator', action='store_true', help='发送一次远程生成请求')
    args = parser.parse_args()
    return 0 if run_checks(args.corpus, args.format, args.generator) else 1


if __name__ == "__main__":
    sys.exit(main())
