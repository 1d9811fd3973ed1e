import numpy as np
import pytest

from bapg.core import SimilarityMatrix


def random_unit_rows(rng, n, e):
    x = rng.normal(size=(n, e))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def gram_similarity(rng, l, e=4, video_id="v"):
    """Similarity matrix of ``l`` random unit vectors in ``e`` dims."""
    x = random_unit_rows(rng, l, e)
    vals = np.clip(x @ x.T, -1.0, 1.0)
    vals = (vals + vals.T) / 2
    np.fill_diagonal(vals, 1.0)
    return SimilarityMatrix(video_id, vals, 1.0)


def block_similarity(sizes, video_id="v", interval=1.0):
    """All-ones diagonal blocks of the given sizes, zeros elsewhere."""
    l = sum(sizes)
    vals = np.zeros((l, l))
    start = 0
    for s in sizes:
        vals[start:start + s, start:start + s] = 1.0
        start += s
    return SimilarityMatrix(video_id, vals, interval)


# filled by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_triplet_config(rng, mode, d=6, h=5, e=4):
    """Random (params, raw triplet, margin) away from the hinge kink."""
    from bapg.contrastive import init_params, triplet_similarities

    while True:
        params = init_params(d, h, e, seed=int(rng.integers(2**31)))
        # widen the weights so similarities spread over [-1, 1]
        params.W1 *= rng.uniform(0.5, 3.0)
        params.W2 *= rng.uniform(0.5, 3.0)
        a, p, n = rng.normal(size=(3, d))
        margin = float(rng.uniform(0.0, 1.5)) if mode == "standard" else float(rng.uniform(-0.5, 1.0))
        s_ap, s_an = (float(v[0]) for v in triplet_similarities(a, p, n, params))
        arg = margin + s_an - s_ap if mode == "standard" else s_an - margin
        if abs(arg) > 1e-3:
            return params, (a, p, n), margin


def finite_difference_mismatches(params, triplet, margin, mode, step=1e-5, rtol=1e-5, atol=1e-7):
    """Coordinates where the analytic gradient misses the central difference."""
    from bapg.contrastive import EncoderParams, batch_loss_and_gradients, loss_gradients

    grads = loss_gradients(*triplet, params, margin, mode)
    bad = []
    for name, g in grads.tensors().items():
        w = getattr(params, name)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + step
            up = batch_loss_and_gradients(*triplet, params, margin, mode)[0]
            w[idx] = orig - step
            down = batch_loss_and_gradients(*triplet, params, margin, mode)[0]
            w[idx] = orig
            num = (up - down) / (2 * step)
            err = abs(g[idx] - num)
            if err > atol and err > rtol * abs(num):
                bad.append((name, idx, g[idx], num))
    return bad
