"""Pure-PyTorch reference rasterizer.

Vectorized front-to-back alpha compositing via an exclusive cumulative
product of transmittances. Autograd provides the backward pass. Slower and
more memory hungry than the compiled core but always available.
"""

import torch

# Keeps transmittance strictly positive so cumprod gradients stay finite.
ALPHA_CAP = 1.0 - 1e-6

BACKEND_NAME = "pure"


def rasterize(
    means2d: torch.Tensor,
    radii: torch.Tensor,
    colors: torch.Tensor,
    opacities: torch.Tensor,
    background: torch.Tensor,
    height: int,
    width: int,
) -> torch.Tensor:
    """Composite splats (already sorted front to back) into an (H, W, 3) image."""
    n = means2d.shape[0]
    if n == 0:
        return background.expand(height, width, 3).clone()
    ys = torch.arange(height, dtype=means2d.dtype)
    xs = torch.arange(width, dtype=means2d.dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    dx = gx.unsqueeze(0) - means2d[:, 0].reshape(-1, 1, 1)
    dy = gy.unsqueeze(0) - means2d[:, 1].reshape(-1, 1, 1)
    sigma_sq = (radii * radii).clamp_min(1e-12).reshape(-1, 1, 1)
    footprint = torch.exp(-(dx * dx + dy * dy) / (2.0 * sigma_sq))
    alpha = (opacities.reshape(-1, 1, 1) * footprint).clamp(max=ALPHA_CAP)
    transmittance = torch.cumprod(1.0 - alpha, dim=0)
    before = torch.cat([torch.ones_like(transmittance[:1]), transmittance[:-1]], dim=0)
    weights = before * alpha  # (N, H, W)
    image = torch.einsum("nhw,nc->hwc", weights, colors)
    return image + transmittance[-1].unsqueeze(-1) * background
