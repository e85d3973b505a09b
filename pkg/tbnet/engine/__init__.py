from .tensor import (
    Tape,
    Tensor,
    backward,
    current_tape,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    reset_tape,
    set_default_dtype,
    zero_grads,
)
from .ops import (
    RunningStats,
    add,
    batch_norm2d,
    concat_channels,
    conv2d,
    dense,
    dropout,
    flatten,
    global_avg_pool,
    maxpool2d,
    mul,
    output_size,
    relu,
    softmax,
    softmax_cross_entropy,
    square,
    sum_all,
)
