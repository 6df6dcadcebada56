# -*- coding: utf-8 -*-
"""
===================================
StyleSync 风格同步仿真 - 主调度程序
===================================

职责：
1. 提供命令行入口（fit-persona / simulate / stats / convert）
2. 初始化日志、加载环境配置与运行配置
3. 全局异常处理，映射为退出码

使用方式：
    python main.py fit-persona --config run.json            # 拟合人设
    python main.py simulate --config run.json --seed 7      # 回放消融 + 统计
    python main.py stats --config run.json --summary out/dd/summary.csv
    python main.py convert --format daily_dialog --input dialogues_text.txt --out dd.jsonl

退出码：
    0   成功
    1   运行失败（已写出的结果目录带 _FAILED 标记）
    2   用法或配置错误（含输入路径不存在）
    130 用户中断
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

from src import __app_name__, __version__
from src.config import get_config
from src.errors import ConfigError, StyleSyncError

# 配置日志格式
LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(name)-20s | %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130

# setup_logging 安装的 handler，重复初始化时先移除
_installed_handlers: List[logging.Handler] = []


def setup_logging(debug: bool = False, log_dir: str = "./logs", log_level: str = "INFO") -> int:
    """
    配置日志系统（同时输出到控制台和文件）

    Args:
        debug: 是否启用调试模式（控制台强制 DEBUG）
        log_dir: 日志文件目录
        log_level: 控制台日志级别（LOG_LEVEL），无法识别时回退到 INFO

    Returns:
        控制台 handler 的级别
    """
    level = logging.DEBUG if debug else logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)

    # 日志文件路径（按日期分文件）
    today_str = datetime.now().strftime('%Y%m%d')
    log_file = log_path / f"{__app_name__}_{today_str}.log"
    debug_log_file = log_path / f"{__app_name__}_debug_{today_str}.log"

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)  # 由 handler 控制输出级别
    for handler in _installed_handlers:
        root_logger.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    formatter = logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT)

    # Handler 1: 控制台输出
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)

    # Handler 2: 常规日志文件（INFO 级别，10MB 轮转）
    file_handler = RotatingFileHandler(log_file, maxBytes=10 * 1024 * 1024, backupCount=5, encoding='utf-8')
    file_handler.setLevel(logging.INFO)

    # Handler 3: 调试日志文件（DEBUG 级别，50MB 轮转）
    debug_handler = RotatingFileHandler(debug_log_file, maxBytes=50 * 1024 * 1024, backupCount=3, encoding='utf-8')
    debug_handler.setLevel(logging.DEBUG)

    for handler in (console_handler, file_handler, debug_handler):
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)
        _installed_handlers.append(handler)

    # 降低第三方库的日志级别
    for noisy in ('matplotlib', 'httpx', 'openai', 'urllib3'):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    logging.debug(f"日志系统初始化完成，日志目录: {log_path.absolute()}")
    return level


logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """用法错误抛出 ConfigError 而不是直接退出，由 main() 统一映射为退出码 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(f"usage error: {message}")


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """解析命令行参数"""
    parser = _ArgumentParser(
        prog='stylesync',
        description='对话风格适配策略的回放仿真与统计评测',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
示例:
  python main.py fit-persona --config run.json --out personas/
  python main.py simulate --config run.json --policies static,uncapped,hybrid
  python main.py simulate --config run.json --windows 1,3,5,8 --closed-loop echo,styled
  python main.py stats --config run.json --summary out/dd/summary.csv
  python main.py convert --format persona_chat --input train_self_original.txt --out pc.jsonl
        '''
    )
    parser.add_argument('--version', action='version', version=f'{__app_name__} {__version__}')
    parser.add_argument('--debug', action='store_true', help='启用调试模式，输出详细日志')

    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument('--config', type=str, default=None, help='运行配置 JSON 文件')
        p.add_argument('--seed', type=int, default=None, help='随机种子（覆盖配置文件）')
        p.add_argument('--out', type=str, default=None, help='输出路径（覆盖配置文件）')
        p.add_argument('--jobs', type=int, default=None, help='并发线程数（默认使用 MAX_WORKERS）')
        p.add_argument('--debug', action='store_true', default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    p_fit = sub.add_parser('fit-persona', help='在语料上拟合人设模型并保存为 JSON')
    add_common(p_fit)

    p_sim = sub.add_parser('simulate', help='回放全部策略，输出前沿、消融与统计结果')
    add_common(p_sim)
    p_sim.add_argument('--policies', type=str, default=None, help='策略 kind 列表，逗号分隔')
    p_sim.add_argument('--windows', type=str, default=None, help='预测同步性窗口大小，逗号分隔')
    p_sim.add_argument('--closed-loop', type=str, default=None, help='闭环生成器列表，逗号分隔（echo,fixed,styled,remote）')

    p_stats = sub.add_parser('stats', help='由已有 summary.csv 重新计算 stats.csv')
    add_common(p_stats)
    p_stats.add_argument('--summary', type=str, required=True, help='summary.csv 路径')

    p_conv = sub.add_parser('convert', help='把公开语料导出转换为会话 JSONL')
    p_conv.add_argument('--format', type=str, required=True, choices=['daily_dialog', 'persona_chat', 'empathetic'])
    p_conv.add_argument('--input', type=str, required=True, help='语料文件或目录')
    p_conv.add_argument('--out', type=str, required=True, help='输出 JSONL 文件')
    p_conv.add_argument('--debug', action='store_true', default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    return parser.parse_args(argv)


def _load_run_config(args: argparse.Namespace):
    from src.run_config import load_run_config

    run_config = load_run_config(args.config)
    return run_config.with_overrides(
        seed=args.seed,
        policies=getattr(args, 'policies', None),
        windows=getattr(args, 'windows', None),
        closed_loop=getattr(args, 'closed_loop', None),
        jobs=args.jobs,
    )


def cmd_fit_persona(args: argparse.Namespace) -> int:
    """
    拟合人设：单个语料且 --out 以 .json 结尾时写到该文件，否则写到 <输出目录>/persona_<语料>.json
    """
    from src.core.experiment import check_inputs, load_corpus, resolve_persona

    # 总是重新拟合，忽略配置中已保存的人设文件
    run_config = _load_run_config(args)
    run_config = replace(run_config, persona=replace(run_config.persona, path=None))
    check_inputs(run_config)

    out = Path(args.out or run_config.output_dir)
    single_file = out.suffix == '.json'
    if single_file and len(run_config.corpora) != 1:
        raise ConfigError("--out FILE.json needs exactly one corpus; pass a directory instead")

    for spec in run_config.corpora:
        sessions = load_corpus(spec)
        persona = resolve_persona(run_config, spec.name, sessions)
        path = persona.save(out if single_file else out / f"persona_{spec.name}.json")
        logger.info(f"[Persona] {spec.name}: n_samples={persona.scaler.n_samples} -> {path}")
        print(f"{spec.name}\tn_samples={persona.scaler.n_samples}\t{path}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    from src.core.experiment import check_inputs, run_simulation
    from src.report import ReportWriter

    run_config = _load_run_config(args)
    if args.out:
        run_config = run_config.with_overrides(output_dir=args.out)
    check_inputs(run_config)

    logger.info(f"运行配置: hash={run_config.config_hash} seed={run_config.seed} "
                f"策略={[p.label for p in run_config.policies]} 语料={[c.name for c in run_config.corpora]}")

    writer = ReportWriter(run_config.output_dir, run_config.config_hash, run_config.seed)
    writer.clear_failed()
    try:
        run_simulation(run_config, writer)
    except Exception as e:
        writer.mark_failed(e)
        raise
    logger.info(f"输出目录: {Path(run_config.output_dir).absolute()}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    from src.core.experiment import build_stats_rows
    from src.report import ReportWriter, read_table

    run_config = _load_run_config(args)
    summary_path = Path(args.summary)
    if not summary_path.exists():
        raise ConfigError(f"summary path not found: {summary_path}")
    if run_config.validation and not Path(run_config.validation.observed_path).exists():
        raise ConfigError(f"observed path not found: {run_config.validation.observed_path}")

    summary = read_table(summary_path, dtype={"corpus": str, "policy": str, "session_id": str, "participant_id": str})
    out = Path(args.out) if args.out else Path(run_config.output_dir) / "stats.csv"
    writer = ReportWriter(out.parent, run_config.config_hash, run_config.seed)
    rows = build_stats_rows(run_config, summary, max_workers=run_config.jobs)
    writer.write_stats(rows, out)
    logger.info(f"[Stats] 已写出 {len(rows)} 行 -> {out}")
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    from corpus_provider import CorpusManager

    input_path = Path(args.input)
    if not input_path.exists():
        raise ConfigError(f"input path not found: {input_path}")

    sessions = CorpusManager().adapt_external_corpus(input_path, args.format)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n_lines = 0
    with open(out, 'w', encoding='utf-8', newline='\n') as f:
        for session in sessions:
            for record in session.to_records():
                f.write(json.dumps(record, ensure_ascii=False) + '\n')
                n_lines += 1
    logger.info(f"[Corpus:{args.format}] {len(sessions)} 个会话，{n_lines} 条话语 -> {out}")
    return EXIT_OK


COMMANDS = {
    'fit-persona': cmd_fit_persona,
    'simulate': cmd_simulate,
    'stats': cmd_stats,
    'convert': cmd_convert,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    主入口函数

    Returns:
        退出码（0 表示成功）
    """
    try:
        args = parse_arguments(argv)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    # 加载配置（在设置日志前加载，以获取日志目录）
    config = get_config()
    setup_logging(debug=args.debug or config.debug, log_dir=config.log_dir, log_level=config.log_level)

    logger.info("=" * 60)
    logger.info(f"{__app_name__} {__version__} 启动: {args.command}")
    logger.info("=" * 60)

    for warning in config.validate():
        logger.warning(warning)

    try:
        return COMMANDS[args.command](args)

    except KeyboardInterrupt:
        logger.info("用户中断，程序退出")
        return EXIT_INTERRUPTED

    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return EXIT_USAGE

    except StyleSyncError as e:
        logger.error(f"运行失败: {e}")
        return EXIT_FAILURE

    except Exception as e:
        logger.exception(f"程序执行失败: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
