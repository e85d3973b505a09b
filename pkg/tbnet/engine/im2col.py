"""
Patch-matrix expansion for convolution and its adjoint.

``im2col`` turns an (N, C, H, W) input into a (N*H'*W', C*kH*kW) matrix whose rows are
flattened receptive fields, so a convolution becomes a single matrix multiply.
``col2im`` scatters row gradients back onto the input, summing overlaps.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def pad_spatial(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)), mode="constant")


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    n, c, _, _ = x.shape
    xp = pad_spatial(x, padding)
    if kh == 1 and kw == 1:
        patches = xp[:, :, ::stride, ::stride]
        out_h, out_w = patches.shape[2], patches.shape[3]
        return patches.transpose(0, 2, 3, 1).reshape(n * out_h * out_w, c), out_h, out_w

    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * kh * kw)
    return cols, out_h, out_w


def col2im(dcols: np.ndarray, x_shape, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    n, c, h, w = x_shape
    out_h = output_size(h, kh, stride, padding)
    out_w = output_size(w, kw, stride, padding)
    dxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)

    patches = dcols.reshape(n, out_h, out_w, c, kh, kw)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += patches[:, :, :, :, i, j].transpose(0, 3, 1, 2)

    if padding == 0:
        return dxp
    return dxp[:, :, padding:padding + h, padding:padding + w]
