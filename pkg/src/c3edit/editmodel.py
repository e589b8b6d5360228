"""The 2D editing model: a small k-step denoising editor with two
independently trainable low-rank adapter banks.

The base network is a frozen seeded conv encoder/decoder conditioned on the
source image and a hashed prompt embedding. Editing runs a fixed number of
denoising steps starting from seeded noise mixed with the source; gradients
flow through every step into whichever adapter bank is currently trainable.
One bank ("gt") is trained while fitting the chosen GT edit, the other
("mv") while propagating consistency across views; the inactive bank is
always frozen.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import NumericFault, ParseError, ValidationError
from .scene import ViewImage

log = logging.getLogger(__name__)

PROMPT_DIM = 64
PROMPT_CHANNELS = 8
DEFAULT_CHANNELS = (24, 32, 48)
CHECKPOINT_VERSION = 1

BANKS = ("gt", "mv")

# SiLU attenuates variance by ~0.36x per layer; this gain keeps activations
# from collapsing through the stack.
INIT_GAIN = 1.75
# Widens the sigmoid output range so edits have usable contrast.
LOGIT_SCALE = 4.0
# Seeded noise is drawn at 1/NOISE_DOWNSAMPLE resolution and upsampled, the
# way latent-space noise behaves in pixel space: perturbations are spatially
# smooth, so per-seed variation stays low-dimensional and trainable.
NOISE_DOWNSAMPLE = 16
# Extra weight on the source-image input channels keeps edits strongly view-
# conditioned; otherwise the editor compresses view differences away and
# cross-view behavior stops depending on what the camera actually sees.
SOURCE_INPUT_GAIN = 1.5


def encode_prompt(text: str, dim: int = PROMPT_DIM) -> np.ndarray:
    """Deterministic hashed bag-of-tokens embedding, L2-normalized."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in re.findall(r"[a-z0-9]+", text.lower()):
        digest = hashlib.sha256(token.encode()).digest()
        index = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        vec[index] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


@dataclass
class EditResult:
    image: ViewImage
    provenance: dict


class AdapterBank:
    """Per-layer low-rank factor pairs applied to flattened conv kernels."""

    def __init__(self, layer_shapes: list[tuple[int, int]], rank: int, alpha: float):
        self.rank = rank
        self.alpha = alpha
        self.down: list[torch.nn.Parameter] = []  # A: (rank, in_ch * 9)
        self.up: list[torch.nn.Parameter] = []  # B: (out_ch, rank)
        for out_ch, in_ch in layer_shapes:
            self.down.append(
                torch.nn.Parameter(torch.zeros(rank, in_ch * 9, dtype=torch.float64))
            )
            self.up.append(
                torch.nn.Parameter(torch.zeros(out_ch, rank, dtype=torch.float64))
            )

    def parameters(self) -> list[torch.nn.Parameter]:
        return [*self.down, *self.up]

    def delta(self, index: int, kernel_shape) -> torch.Tensor:
        scale = self.alpha / self.rank
        return (scale * (self.up[index] @ self.down[index])).reshape(kernel_shape)

    def init_gaussian(self, seed: int, std: float) -> None:
        """A factors ~ N(0, std^2), B factors zero: initial delta is exactly 0."""
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for a, b in zip(self.down, self.up):
                a.copy_(torch.randn(a.shape, generator=gen, dtype=torch.float64) * std)
                b.zero_()

    def set_trainable(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad_(flag)


@dataclass
class AdapterPair:
    gt: AdapterBank
    mv: AdapterBank

    def bank(self, which: str) -> AdapterBank:
        if which not in BANKS:
            raise ValidationError(f"unknown adapter bank {which!r}")
        return getattr(self, which)


class EditorModel:
    """Frozen conv denoiser plus the gt/mv adapter pair.

    Layer stack (all 3x3 kernels, no biases): three encoder convs (strides
    1, 2, 2), two decoder convs each preceded by nearest 2x upsampling, and
    an output conv followed by a sigmoid. Inputs are the noisy image, the
    source image and the broadcast projected prompt embedding.
    """

    def __init__(
        self,
        seed: int = 0,
        *,
        num_denoise_steps: int = 5,
        rank: int = 4,
        alpha: float = 4.0,
        channels: tuple[int, int, int] = DEFAULT_CHANNELS,
        lr: float = 1e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        weight_decay: float = 1e-2,
        eps: float = 1e-8,
        init_noise_level: float = 0.9,
        adapter_init_std: float = 2.5,
        mv_adapter_init_std: float = 2.5,
        adapter_seed: int | None = None,
    ):
        if num_denoise_steps < 1:
            raise ValidationError("num_denoise_steps must be >= 1")
        self.num_denoise_steps = num_denoise_steps
        self.rank = rank
        self.alpha = alpha
        self.init_noise_level = init_noise_level
        self.adapter_init_std = adapter_init_std
        self.mv_adapter_init_std = mv_adapter_init_std
        self._optim_kwargs = dict(lr=lr, betas=betas, weight_decay=weight_decay, eps=eps)

        c0, c1, c2 = channels
        in_ch = 3 + 3 + PROMPT_CHANNELS
        # (out_ch, in_ch, stride, upsample_before)
        self.layer_specs = [
            (c0, in_ch, 1, False),
            (c1, c0, 2, False),
            (c2, c1, 2, False),
            (c1, c2, 1, True),
            (c0, c1, 1, True),
            (3, c0, 1, False),
        ]

        gen = torch.Generator().manual_seed(int(seed))
        self.base_weights: list[torch.Tensor] = []
        for out_ch, lin_ch, _, _ in self.layer_specs:
            fan_in = lin_ch * 9
            w = torch.randn(out_ch, lin_ch, 3, 3, generator=gen, dtype=torch.float64)
            w *= INIT_GAIN / math.sqrt(fan_in)
            if not self.base_weights:  # first conv: source channels are 3..5
                w[:, 3:6] *= SOURCE_INPUT_GAIN
            w.requires_grad_(False)
            self.base_weights.append(w)
        self.prompt_proj = torch.randn(
            PROMPT_CHANNELS, PROMPT_DIM, generator=gen, dtype=torch.float64
        ) / math.sqrt(PROMPT_DIM)
        self.prompt_proj.requires_grad_(False)

        shapes = [(out_ch, lin_ch) for out_ch, lin_ch, _, _ in self.layer_specs]
        self.adapters = AdapterPair(
            gt=AdapterBank(shapes, rank, alpha), mv=AdapterBank(shapes, rank, alpha)
        )
        self._optimizers = {
            name: torch.optim.AdamW(self.adapters.bank(name).parameters(), **self._optim_kwargs)
            for name in BANKS
        }
        self.trainable: str = "none"
        self.init_adapters(seed if adapter_seed is None else adapter_seed)
        self.set_trainable("none")

    # -- adapter management -------------------------------------------------

    def init_adapters(self, seed: int) -> None:
        gen_seed = int(seed)
        self.adapters.gt.init_gaussian(gen_seed, self.adapter_init_std)
        # The consistency bank starts gentler: phase-3 visits many views, so
        # its per-step movement is kept below the GT bank's to avoid
        # trampling what phase 2 learned.
        self.adapters.mv.init_gaussian(gen_seed + 1, self.mv_adapter_init_std)
        for opt in self._optimizers.values():
            opt.state.clear()

    def set_trainable(self, which: str) -> None:
        if which not in ("gt", "mv", "none"):
            raise ValidationError(f"trainable selector must be gt/mv/none, got {which!r}")
        self.adapters.gt.set_trainable(which == "gt")
        self.adapters.mv.set_trainable(which == "mv")
        self.trainable = which

    def reset_optimizer(self, which: str) -> None:
        self._optimizers[which].state.clear()

    def optimizer_step(self) -> None:
        if self.trainable == "none":
            log.warning("optimizer_step called with no trainable adapter bank; no-op")
            return
        opt = self._optimizers[self.trainable]
        opt.step()
        opt.zero_grad(set_to_none=True)

    def adapter_state_bytes(self, which: str) -> bytes:
        """Deterministic byte serialization of one bank (factors + moments)."""
        bank = self.adapters.bank(which)
        opt = self._optimizers[which]
        chunks = []
        for p in bank.parameters():
            chunks.append(p.detach().numpy().tobytes())
            state = opt.state.get(p, {})
            for key in ("exp_avg", "exp_avg_sq"):
                if key in state:
                    chunks.append(state[key].detach().numpy().tobytes())
            if "step" in state:
                chunks.append(np.float64(float(state["step"])).tobytes())
        return b"".join(chunks)

    # -- forward pass --------------------------------------------------------

    def _effective_kernel(self, index: int, use_adapters: bool) -> torch.Tensor:
        w = self.base_weights[index]
        if not use_adapters:
            return w
        return (
            w
            + self.adapters.gt.delta(index, w.shape)
            + self.adapters.mv.delta(index, w.shape)
        )

    def _predict(self, x: torch.Tensor, source_chw: torch.Tensor, prompt_map: torch.Tensor,
                 use_adapters: bool) -> torch.Tensor:
        h = torch.cat([x.permute(2, 0, 1).unsqueeze(0), source_chw, prompt_map], dim=1)
        last = len(self.layer_specs) - 1
        for i, (_, _, stride, upsample) in enumerate(self.layer_specs):
            if upsample:
                h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.conv2d(h, self._effective_kernel(i, use_adapters), stride=stride, padding=1)
            if i != last:
                h = F.silu(h)
        return torch.sigmoid(LOGIT_SCALE * h).squeeze(0).permute(1, 2, 0)

    def edit_tensor(
        self, source, prompt: str, seed: int, *, use_adapters: bool = True
    ) -> torch.Tensor:
        """Differentiable editing pass; returns an (H, W, 3) tensor in [0, 1].

        Seeded noise is injected only before the first step; each step blends
        the running image toward the network prediction on a linear schedule
        that reaches full replacement at the final step.
        """
        if not prompt or not prompt.strip():
            raise ValidationError("prompt must be non-empty")
        if torch.is_tensor(source):
            src = source.to(torch.float64)
        elif hasattr(source, "pixels"):
            src = torch.from_numpy(np.asarray(source.pixels, dtype=np.float64))
        else:
            src = torch.as_tensor(np.asarray(source, dtype=np.float64))
        if src.ndim != 3 or src.shape[2] != 3:
            raise ValidationError(f"source must be HxWx3, got {tuple(src.shape)}")
        height, width = src.shape[:2]
        if height % 4 or width % 4:
            raise ValidationError("image sides must be divisible by 4")

        emb = torch.from_numpy(encode_prompt(prompt))
        prompt_map = (self.prompt_proj @ emb).reshape(1, PROMPT_CHANNELS, 1, 1).expand(
            1, PROMPT_CHANNELS, height, width
        )
        source_chw = src.permute(2, 0, 1).unsqueeze(0)

        gen = torch.Generator().manual_seed(int(seed))
        low_h = max(1, height // NOISE_DOWNSAMPLE)
        low_w = max(1, width // NOISE_DOWNSAMPLE)
        coarse = torch.randn((1, 3, low_h, low_w), generator=gen, dtype=torch.float64)
        noise = F.interpolate(
            coarse, size=(height, width), mode="bilinear", align_corners=False
        ).squeeze(0).permute(1, 2, 0)
        x = (1.0 - self.init_noise_level) * src + self.init_noise_level * noise
        for k in range(self.num_denoise_steps):
            pred = self._predict(x, source_chw, prompt_map, use_adapters)
            if torch.isnan(pred).any():
                raise NumericFault(f"NaN in denoise step {k}")
            blend = (k + 1) / self.num_denoise_steps
            x = (1.0 - blend) * x + blend * pred
        return x

    # -- checkpointing -------------------------------------------------------

    def save_adapters(self, path) -> None:
        arrays: dict[str, np.ndarray] = {
            "format_version": np.int64(CHECKPOINT_VERSION),
            "rank": np.int64(self.rank),
            "alpha": np.float64(self.alpha),
            "num_layers": np.int64(len(self.layer_specs)),
        }
        for name in BANKS:
            bank = self.adapters.bank(name)
            opt = self._optimizers[name]
            for i, p in enumerate(bank.parameters()):
                key = f"{name}.{i}"
                arrays[key] = p.detach().numpy()
                state = opt.state.get(p, {})
                if state:
                    arrays[f"{key}.exp_avg"] = state["exp_avg"].detach().numpy()
                    arrays[f"{key}.exp_avg_sq"] = state["exp_avg_sq"].detach().numpy()
                    arrays[f"{key}.step"] = np.float64(float(state["step"]))
        np.savez(path, **arrays)

    def load_adapters(self, path) -> None:
        try:
            with np.load(path, allow_pickle=False) as data:
                arrays = {k: data[k] for k in data.files}
        except Exception as exc:
            raise ParseError(f"adapter checkpoint {path}: {exc}") from exc
        version = int(arrays.get("format_version", -1))
        if version != CHECKPOINT_VERSION:
            raise ParseError(
                f"adapter checkpoint {path}: unsupported format_version {version}"
            )
        if int(arrays["rank"]) != self.rank:
            raise ValidationError(
                f"adapter rank mismatch: checkpoint has {int(arrays['rank'])}, "
                f"model has {self.rank}"
            )
        if int(arrays["num_layers"]) != len(self.layer_specs):
            raise ValidationError("adapter checkpoint layer count mismatch")
        for name in BANKS:
            bank = self.adapters.bank(name)
            opt = self._optimizers[name]
            opt.state.clear()
            for i, p in enumerate(bank.parameters()):
                key = f"{name}.{i}"
                if key not in arrays:
                    raise ParseError(f"adapter checkpoint missing array '{key}'")
                stored = arrays[key]
                if stored.shape != tuple(p.shape):
                    raise ValidationError(
                        f"adapter checkpoint shape mismatch for '{key}': "
                        f"{stored.shape} vs {tuple(p.shape)}"
                    )
                with torch.no_grad():
                    p.copy_(torch.from_numpy(stored))
                if f"{key}.step" in arrays:
                    opt.state[p] = {
                        "step": torch.tensor(float(arrays[f"{key}.step"])),
                        "exp_avg": torch.from_numpy(arrays[f"{key}.exp_avg"].copy()),
                        "exp_avg_sq": torch.from_numpy(arrays[f"{key}.exp_avg_sq"].copy()),
                    }


def edit(
    model: EditorModel,
    source: ViewImage,
    prompt: str,
    seed: int,
    *,
    pass_label: str = "edit",
) -> EditResult:
    """One complete editing pass; non-differentiable convenience wrapper."""
    with torch.no_grad():
        out = model.edit_tensor(source, prompt, seed)
    view_id = source.view_id if isinstance(source, ViewImage) else -1
    return EditResult(
        image=ViewImage(view_id=view_id, pixels=out.numpy()),
        provenance={
            "view_id": view_id,
            "prompt": prompt,
            "seed": int(seed),
            "pass_label": pass_label,
        },
    )
