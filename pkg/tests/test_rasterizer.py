"""Backend-parity and gradient tests for the splat rasterizer."""

import numpy as np
import pytest
import torch

from c3edit import rasterizer


def _random_splats(n, height, width, seed):
    rng = np.random.default_rng(seed)
    means = torch.tensor(
        np.column_stack(
            [rng.uniform(-5, width + 5, n), rng.uniform(-5, height + 5, n)]
        )
    )
    radii = torch.tensor(rng.uniform(0.5, 6.0, n))
    colors = torch.tensor(rng.uniform(0, 1, (n, 3)))
    opac = torch.tensor(rng.uniform(0.05, 1.0, n))
    bg = torch.tensor(rng.uniform(0, 1, 3))
    return means, radii, colors, opac, bg


def _backends():
    names = ["pure"]
    try:
        rasterizer.get_backend("compiled")
        names.append("compiled")
    except ImportError:
        pass
    return names


HAVE_COMPILED = "compiled" in _backends()


@pytest.mark.parametrize("name", _backends())
def test_empty_splat_list_is_background(name):
    backend = rasterizer.get_backend(name)
    empty = torch.zeros((0, 2), dtype=torch.float64)
    bg = torch.tensor([0.2, 0.4, 0.6], dtype=torch.float64)
    img = backend.rasterize(
        empty, torch.zeros(0, dtype=torch.float64),
        torch.zeros((0, 3), dtype=torch.float64),
        torch.zeros(0, dtype=torch.float64), bg, 8, 8,
    )
    assert torch.allclose(img, bg.expand(8, 8, 3))


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled backend not built")
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree_forward(seed):
    args = _random_splats(40, 24, 24, seed)
    pure = rasterizer.get_backend("pure").rasterize(*args, 24, 24)
    compiled = rasterizer.get_backend("compiled").rasterize(*args, 24, 24)
    assert (pure - compiled).abs().max().item() < 1e-12


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled backend not built")
def test_backends_agree_backward():
    means, radii, colors, opac, bg = _random_splats(20, 16, 16, 3)
    grads = {}
    for name in ("pure", "compiled"):
        inputs = [t.clone().requires_grad_(True) for t in (means, radii, colors, opac, bg)]
        img = rasterizer.get_backend(name).rasterize(*inputs, 16, 16)
        img.square().sum().backward()
        grads[name] = [t.grad.clone() for t in inputs]
    for gp, gc in zip(grads["pure"], grads["compiled"]):
        assert (gp - gc).abs().max().item() < 1e-9


@pytest.mark.parametrize("name", _backends())
def test_gradcheck(name):
    backend = rasterizer.get_backend(name)
    means, radii, colors, opac, bg = _random_splats(6, 12, 12, 11)
    inputs = tuple(t.clone().requires_grad_(True) for t in (means, radii, colors, opac, bg))
    assert torch.autograd.gradcheck(
        lambda *args: backend.rasterize(*args, 12, 12), inputs, eps=1e-6, atol=1e-8
    )


@pytest.mark.parametrize("name", _backends())
def test_output_is_convex_combination(name):
    backend = rasterizer.get_backend(name)
    args = _random_splats(60, 20, 20, 5)
    img = backend.rasterize(*args, 20, 20)
    assert img.min().item() >= 0.0
    assert img.max().item() <= 1.0


def test_active_backend_reports_a_backend():
    assert rasterizer.active_backend() in ("pure", "compiled")
