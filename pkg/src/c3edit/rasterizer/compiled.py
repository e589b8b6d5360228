"""torch.autograd bridge for the compiled rasterizer core."""

import torch

from . import _core

BACKEND_NAME = "compiled"


class _Rasterize(torch.autograd.Function):
    @staticmethod
    def forward(ctx, means2d, radii, colors, opacities, background, height, width):
        ctx.save_for_backward(means2d, radii, colors, opacities, background)
        image = _core.rasterize_forward(
            means2d.detach().numpy(),
            radii.detach().numpy(),
            colors.detach().numpy(),
            opacities.detach().numpy(),
            background.detach().numpy(),
            height,
            width,
        )
        return torch.from_numpy(image)

    @staticmethod
    def backward(ctx, grad_out):
        means2d, radii, colors, opacities, background = ctx.saved_tensors
        g_means, g_radii, g_colors, g_opac, g_bg = _core.rasterize_backward(
            means2d.detach().numpy(),
            radii.detach().numpy(),
            colors.detach().numpy(),
            opacities.detach().numpy(),
            background.detach().numpy(),
            grad_out.contiguous().numpy(),
        )
        return (
            torch.from_numpy(g_means),
            torch.from_numpy(g_radii),
            torch.from_numpy(g_colors),
            torch.from_numpy(g_opac),
            torch.from_numpy(g_bg),
            None,
            None,
        )


def rasterize(means2d, radii, colors, opacities, background, height, width):
    if means2d.shape[0] == 0:
        return background.expand(height, width, 3).clone()
    args = [
        t.contiguous().to(torch.float64)
        for t in (means2d, radii, colors, opacities, background)
    ]
    return _Rasterize.apply(*args, height, width)
