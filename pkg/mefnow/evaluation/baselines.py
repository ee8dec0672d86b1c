import numpy as np
import scipy.ndimage
import numba


def persistence_forecast(inputs):
    """Both lead times predicted as the last observed frame."""
    frames = np.asarray(inputs)
    if frames.shape[0] < 1:
        raise ValueError('Persistence needs at least one input frame')
    return frames[-1].copy(), frames[-1].copy()


def optical_flow_forecast(inputs, block_size=8, search_radius=4, n_levels=3):
    """
    Extrapolate the motion between the last two input frames.

    A dense flow field is estimated between the last two frames by coarse-to-fine block matching. The last frame is
    then back-warped one step along the flow for lead 1, and the lead-1 frame is warped one further step for lead 2,
    so lead 2 carries two rounds of bilinear smoothing and border fill. Samples that trace back outside the domain
    take the nearest border value.

    Args:
        inputs (numpy.ndarray): Input frames ``[T, 1, H, W]`` (or ``[T, H, W]``), ``T >= 2``.
        block_size (int): Block size in pixels at every pyramid level.
        search_radius (int): Search radius in pixels around the propagated estimate at every level.
        n_levels (int): Number of pyramid levels.

    Returns:
        tuple: Frames for leads 1 and 2, shaped like one input frame.

    """
    frames = np.asarray(inputs, dtype=np.float64)
    if frames.shape[0] < 2:
        raise ValueError('Optical flow needs at least two input frames')
    previous, current = _as_image(frames[-2]), _as_image(frames[-1])
    flow = estimate_flow(previous, current, block_size, search_radius, n_levels)
    first = warp(current, flow)
    second = warp(first, flow)
    shape = frames[-1].shape
    return first.reshape(shape), second.reshape(shape)


def estimate_flow(previous, current, block_size=8, search_radius=4, n_levels=3):
    """
    Dense motion field ``[2, H, W]`` (``u`` along columns, ``v`` along rows) in pixels per frame.

    Content at ``p - flow(p)`` in ``previous`` is found at ``p`` in ``current``.

    """
    previous = np.asarray(previous, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if previous.shape != current.shape:
        raise ValueError('Frames differ in shape: ' + str(previous.shape) + ' and ' + str(current.shape))
    if min(current.shape) < block_size:
        raise ValueError(
            'Frames of size ' + str(current.shape) + ' are smaller than one ' + str(block_size) + ' pixel block'
        )

    pyramid = [(previous, current)]
    while len(pyramid) < n_levels and min(pyramid[-1][1].shape) // 2 >= block_size:
        pyramid.append((_downsample(pyramid[-1][0]), _downsample(pyramid[-1][1])))

    flow = None
    for prev_level, curr_level in reversed(pyramid):
        if flow is None:
            guess = np.zeros((2,) + curr_level.shape)
        else:
            guess = 2.0 * _resize_flow(flow, curr_level.shape)
        block_flow = _match_blocks(prev_level, curr_level, guess, block_size, search_radius)
        flow = _dense_flow(block_flow, curr_level.shape, block_size)
    return flow


def warp(frame, flow):
    """Semi-Lagrangian backward warp: ``out(p) = frame(p - flow(p))`` with bilinear sampling."""
    rows, cols = np.meshgrid(np.arange(frame.shape[0]), np.arange(frame.shape[1]), indexing='ij')
    coordinates = np.array([rows - flow[1], cols - flow[0]])
    return scipy.ndimage.map_coordinates(frame, coordinates, order=1, mode='nearest')


def _as_image(frame):
    frame = np.asarray(frame, dtype=np.float64)
    return frame.reshape(frame.shape[-2:])


def _downsample(image):
    height, width = (image.shape[0] // 2) * 2, (image.shape[1] // 2) * 2
    image = image[:height, :width]
    return image.reshape(height // 2, 2, width // 2, 2).mean(axis=(1, 3))


def _resize_flow(flow, shape):
    # Bilinear resampling of each component at cell centres of the new grid
    scale_r = flow.shape[1] / shape[0]
    scale_c = flow.shape[2] / shape[1]
    rows = (np.arange(shape[0]) + 0.5) * scale_r - 0.5
    cols = (np.arange(shape[1]) + 0.5) * scale_c - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing='ij')
    return np.array([
        scipy.ndimage.map_coordinates(component, [rr, cc], order=1, mode='nearest') for component in flow
    ])


def _dense_flow(block_flow, shape, block_size):
    # Bilinear interpolation between block centres
    rows = (np.arange(shape[0]) - (block_size - 1) / 2.0) / block_size
    cols = (np.arange(shape[1]) - (block_size - 1) / 2.0) / block_size
    rr, cc = np.meshgrid(rows, cols, indexing='ij')
    return np.array([
        scipy.ndimage.map_coordinates(component, [rr, cc], order=1, mode='nearest') for component in block_flow
    ])


def _match_blocks(previous, current, guess, block_size, search_radius):
    n_rows = current.shape[0] // block_size
    n_cols = current.shape[1] // block_size
    centre = block_size // 2
    guess_u = np.round(guess[0, centre:n_rows * block_size:block_size, centre:n_cols * block_size:block_size])
    guess_v = np.round(guess[1, centre:n_rows * block_size:block_size, centre:n_cols * block_size:block_size])
    u, v = _block_search(
        previous, current, guess_u.astype(np.int64), guess_v.astype(np.int64), block_size, search_radius
    )
    return np.array([u, v])


@numba.jit(nopython=True)
def _block_sad(previous, current, row0, col0, block_size, du, dv):
    height, width = previous.shape
    total = 0.0
    for i in range(block_size):
        for j in range(block_size):
            r = min(max(row0 + i - dv, 0), height - 1)
            c = min(max(col0 + j - du, 0), width - 1)
            total += abs(current[row0 + i, col0 + j] - previous[r, c])
    return total


@numba.jit(nopython=True)
def _parabolic_offset(lower, centre, upper):
    denominator = lower - 2.0 * centre + upper
    if centre == 0.0 or denominator <= 0.0:
        return 0.0
    offset = 0.5 * (lower - upper) / denominator
    return min(max(offset, -0.5), 0.5)


@numba.jit(nopython=True)
def _block_search(previous, current, guess_u, guess_v, block_size, search_radius):
    n_rows, n_cols = guess_u.shape
    u = np.zeros((n_rows, n_cols))
    v = np.zeros((n_rows, n_cols))
    for br in range(n_rows):
        for bc in range(n_cols):
            row0 = br * block_size
            col0 = bc * block_size
            gu = guess_u[br, bc]
            gv = guess_v[br, bc]

            # Centre first so that ties (e.g. featureless blocks) keep the propagated estimate
            best_du = gu
            best_dv = gv
            best = _block_sad(previous, current, row0, col0, block_size, gu, gv)
            worst = best
            for dv in range(gv - search_radius, gv + search_radius + 1):
                for du in range(gu - search_radius, gu + search_radius + 1):
                    if du == gu and dv == gv:
                        continue
                    sad = _block_sad(previous, current, row0, col0, block_size, du, dv)
                    worst = max(worst, sad)
                    if sad < best:
                        best = sad
                        best_du = du
                        best_dv = dv

            sub_u = 0.0
            sub_v = 0.0
            if worst > best:
                sub_u = _parabolic_offset(
                    _block_sad(previous, current, row0, col0, block_size, best_du - 1, best_dv),
                    best,
                    _block_sad(previous, current, row0, col0, block_size, best_du + 1, best_dv),
                )
                sub_v = _parabolic_offset(
                    _block_sad(previous, current, row0, col0, block_size, best_du, best_dv - 1),
                    best,
                    _block_sad(previous, current, row0, col0, block_size, best_du, best_dv + 1),
                )
            u[br, bc] = best_du + sub_u
            v[br, bc] = best_dv + sub_v
    return u, v
