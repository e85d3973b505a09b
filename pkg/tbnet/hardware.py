import logging
import os
import platform
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from rich.console import Console

from .errors import UsageError
from .utils.config import THREADS_ENV

logger = logging.getLogger(__name__)


PROC_CPUINFO = Path("/proc/cpuinfo")


def _name_from_proc(path: Path = PROC_CPUINFO) -> Optional[str]:
    try:
        text = path.read_text(errors="replace")
    except OSError:
        return None
    for line in text.splitlines():
        key, _, value = line.partition(":")
        if key.strip().lower() == "model name":
            return value
    return None


def _name_from_cpuinfo() -> Optional[str]:
    import cpuinfo
    info = cpuinfo.get_cpu_info()
    return info.get("brand_raw") or info.get("brand")


# cheapest first; py-cpuinfo may spawn a subprocess
CPU_NAME_SOURCES: Tuple[Callable[[], Optional[str]], ...] = (_name_from_proc, _name_from_cpuinfo, platform.processor)


@lru_cache(maxsize=1)
def get_cpu_name() -> str:
    """First non-blank name from CPU_NAME_SOURCES with whitespace collapsed, else "CPU"."""
    for source in CPU_NAME_SOURCES:
        try:
            name = source()
        except Exception as e:
            logger.debug("CPU name source %s failed: %s", getattr(source, "__name__", source), e)
            continue
        if name and name.strip():
            return " ".join(name.split())
    return "CPU"


def resolve_threads(cli_value: Optional[int], config: dict) -> int:
    """--threads, then $TBNET_THREADS, then the config file, then 1."""
    source, value = "--threads", cli_value
    if value is None and os.environ.get(THREADS_ENV):
        source, value = THREADS_ENV, os.environ[THREADS_ENV]
    if value is None:
        source, value = "config", config.get("runtime", {}).get("threads", 1)

    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"Invalid thread count '{value}' from {source}; must be a positive integer")
    if threads < 1:
        raise UsageError(f"Invalid thread count {threads} from {source}; must be a positive integer")
    return threads


def describe_compute(threads: int, console: Console) -> None:
    cpu_name = get_cpu_name()
    cores = os.cpu_count() or 1
    console.print(f"[bold blue]🖥️ Hardware Detected:[/bold blue] CPU ({cpu_name}, {cores} cores)")
    mode = "serial" if threads == 1 else f"{threads} worker threads"
    console.print(f"[dim]   numpy {np.__version__}, {mode}[/dim]")
    logger.debug("Resolved %d worker thread(s) on %d cores", threads, cores)
