"""Hot compositing loops, numba-compiled unless OBJSPLAT_NO_NUMBA is set.

The pure-Python function objects are kept alongside the (possibly) compiled
ones so the benchmark can time both paths.
"""

import math


from ..accel import maybe_njit


def _fill_tile_lists(tx0, tx1, ty0, ty1, offsets, n_tiles_x, tile_ids, splat_ids):
    for m in range(len(tx0)):
        pos = offsets[m]
        for ty in range(ty0[m], ty1[m] + 1):
            for tx in range(tx0[m], tx1[m] + 1):
                tile_ids[pos] = ty * n_tiles_x + tx
                splat_ids[pos] = m
                pos += 1


def _tile_forward(
    means2d,
    conics,
    opacities,
    channels,
    sorted_splats,
    tile_range,
    n_tiles_x,
    tile_size,
    width,
    height,
    alpha_min,
    t_min,
    out,
    final_t,
    n_contrib,
):
    n_tiles = len(tile_range) - 1
    n_channels = channels.shape[1]
    for t in range(n_tiles):
        x0 = (t % n_tiles_x) * tile_size
        y0 = (t // n_tiles_x) * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        lo = tile_range[t]
        hi = tile_range[t + 1]
        for py in range(y0, y1):
            for px in range(x0, x1):
                trans = 1.0
                processed = 0
                for j in range(lo, hi):
                    s = sorted_splats[j]
                    dx = px - means2d[s, 0]
                    dy = py - means2d[s, 1]
                    power = (
                        -0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy)
                        - conics[s, 1] * dx * dy
                    )
                    processed = j - lo + 1
                    if power > 0.0:
                        continue
                    alpha = opacities[s] * math.exp(power)
                    if alpha > 0.99:
                        alpha = 0.99
                    if alpha < alpha_min:
                        continue
                    w = alpha * trans
                    for k in range(n_channels):
                        out[py, px, k] += w * channels[s, k]
                    trans *= 1.0 - alpha
                    if trans < t_min:
                        break
                final_t[py, px] = trans
                n_contrib[py, px] = processed


def _tile_backward(
    means2d,
    conics,
    opacities,
    channels,
    sorted_splats,
    tile_range,
    n_tiles_x,
    tile_size,
    width,
    height,
    alpha_min,
    final_t,
    n_contrib,
    grad_out,
    bg_channel,
    d_means2d,
    d_conics,
    d_opacities,
    d_channels,
):
    n_tiles = len(tile_range) - 1
    n_channels = channels.shape[1]
    for t in range(n_tiles):
        x0 = (t % n_tiles_x) * tile_size
        y0 = (t // n_tiles_x) * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        lo = tile_range[t]
        for py in range(y0, y1):
            for px in range(x0, x1):
                t_run = final_t[py, px]
                # residual transmittance feeds the background channel
                s_dot = t_run * grad_out[py, px, bg_channel]
                last = lo + n_contrib[py, px]
                for j in range(last - 1, lo - 1, -1):
                    s = sorted_splats[j]
                    dx = px - means2d[s, 0]
                    dy = py - means2d[s, 1]
                    power = (
                        -0.5 * (conics[s, 0] * dx * dx + conics[s, 2] * dy * dy)
                        - conics[s, 1] * dx * dy
                    )
                    if power > 0.0:
                        continue
                    g = math.exp(power)
                    alpha = opacities[s] * g
                    clamped = alpha > 0.99
                    if clamped:
                        alpha = 0.99
                    if alpha < alpha_min:
                        continue
                    t_before = t_run / (1.0 - alpha)
                    w_dot = 0.0
                    for k in range(n_channels):
                        gk = grad_out[py, px, k]
                        d_channels[s, k] += alpha * t_before * gk
                        w_dot += channels[s, k] * gk
                    d_alpha = t_before * w_dot - s_dot / (1.0 - alpha)
                    s_dot += alpha * t_before * w_dot
                    t_run = t_before
                    if clamped:
                        continue  # flat region of the 0.99 clamp
                    d_opacities[s] += g * d_alpha
                    d_power = alpha * d_alpha
                    d_conics[s, 0] += -0.5 * dx * dx * d_power
                    d_conics[s, 1] += -dx * dy * d_power
                    d_conics[s, 2] += -0.5 * dy * dy * d_power
                    d_means2d[s, 0] += (conics[s, 0] * dx + conics[s, 1] * dy) * d_power
                    d_means2d[s, 1] += (conics[s, 1] * dx + conics[s, 2] * dy) * d_power


fill_tile_lists_py = _fill_tile_lists
tile_forward_py = _tile_forward
tile_backward_py = _tile_backward

fill_tile_lists = maybe_njit(_fill_tile_lists)
tile_forward = maybe_njit(_tile_forward)
tile_backward = maybe_njit(_tile_backward)
