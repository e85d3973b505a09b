from typing import Sequence


def format_count(n: int) -> str:
    return f"{n:,}"


def format_shape(shape: Sequence[int]) -> str:
    """(C, H, W) -> 'H×W×C', the way layer tables list activations."""
    if len(shape) == 3:
        c, h, w = shape
        return f"{h}×{w}×{c}"
    return "×".join(str(d) for d in shape)


def format_percent(value: float) -> str:
    return f"{round(value * 100):d}%"
