"""Session state machine: candidate generation, GT selection, GT fitting,
view propagation, final editing and lifting back into the splat scene.

A session walks a fixed phase order and persists itself into a session
directory after every phase, so the interactive GT-selection step (and any
crash) can be followed by `resume`. All randomness is derived from the
session seed by labeled counters, which makes full runs and resumed runs
bit-reproducible.
"""

from __future__ import annotations

import json
import logging
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .editmodel import EditorModel, EditResult, edit
from .errors import NumericFault, ParseError, PhaseError, ValidationError
from .evalmetrics import build_report
from .losses import LossWeights, inter_loss_terms, intra_loss_terms
from .propagation import (
    PropagationState,
    build_schedule,
    closest_processed,
    record_edit,
    visits_from_ordered,
)
from .scene import (
    Camera,
    SplatScene,
    ViewImage,
    load_png,
    load_scene,
    quantize,
    render,
    render_tensors,
    save_png,
    save_scene,
)
from .seeding import derive_seed

log = logging.getLogger(__name__)

PHASES = (
    "created",
    "candidates_ready",
    "gt_selected",
    "gt_fitted",
    "propagated",
    "edited",
    "lifted",
)

MANIFEST_VERSION = 1

ProgressCallback = Callable[[dict], None]


def phase_index(phase: str) -> int:
    try:
        return PHASES.index(phase)
    except ValueError:
        raise ValidationError(f"unknown phase {phase!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters for a full session run."""

    intra_iters: int = 30
    inter_iters_per_view: int = 3
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    lambda5: float = 1.0
    lambda6: float = 1.0
    num_denoise_steps: int = 5
    adapter_rank: int = 4
    adapter_alpha: float = 4.0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-2
    eps: float = 1e-8
    lift_steps: int = 200
    lift_lr: float = 0.02
    lift_positions: bool = False
    candidate_seeds: tuple[int, ...] = (0,)
    init_noise_level: float = 0.9
    adapter_init_std: float = 2.5
    mv_adapter_init_std: float = 2.5
    # "dual" trains the gt bank in phase 2 and the mv bank in phase 3;
    # "single" reuses the gt bank for both (the ablation baseline).
    adapter_mode: str = "dual"
    propagation_order: str = "distance"  # or "random"
    view_subset: tuple[int, ...] | None = None

    def __post_init__(self):
        for name in ("intra_iters", "inter_iters_per_view", "lift_steps", "num_denoise_steps"):
            if getattr(self, name) < 1:
                raise ValidationError(f"config {name} must be >= 1")
        if self.adapter_mode not in ("dual", "single"):
            raise ValidationError("adapter_mode must be 'dual' or 'single'")
        if self.propagation_order not in ("distance", "random"):
            raise ValidationError("propagation_order must be 'distance' or 'random'")
        if not self.candidate_seeds:
            raise ValidationError("candidate_seeds must not be empty")

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            lambda4=self.lambda4,
            lambda5=self.lambda5,
            lambda6=self.lambda6,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["candidate_seeds"] = list(self.candidate_seeds)
        data["view_subset"] = list(self.view_subset) if self.view_subset else None
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParseError(f"run config: unknown fields {sorted(unknown)}")
        kwargs = dict(data)
        if "candidate_seeds" in kwargs and kwargs["candidate_seeds"] is not None:
            kwargs["candidate_seeds"] = tuple(int(s) for s in kwargs["candidate_seeds"])
        if "betas" in kwargs:
            raise ParseError("run config: use beta1/beta2, not betas")
        if kwargs.get("view_subset") is not None:
            kwargs["view_subset"] = tuple(int(v) for v in kwargs["view_subset"])
        return cls(**kwargs)


class EditSession:
    """One prompt, one scene, one trained editor; see module docstring."""

    def __init__(
        self,
        scene: SplatScene,
        cameras: list[Camera],
        prompt: str,
        rng_seed: int,
        config: RunConfig | None = None,
        directory: str | Path | None = None,
    ):
        if not prompt or not prompt.strip():
            raise ValidationError("prompt must be non-empty")
        if len(cameras) < 2:
            raise ValidationError("a session needs at least 2 views")
        if len({cam.id for cam in cameras}) != len(cameras):
            raise ValidationError("camera ids must be unique")
        self.scene = scene
        self.cameras = sorted(cameras, key=lambda c: c.id)
        self.prompt = prompt
        self.rng_seed = int(rng_seed)
        self.config = config or RunConfig()
        self.directory = Path(directory) if directory is not None else None
        self.session_id = uuid.uuid4().hex[:12]
        self.created_at = time.time()

        self.phase = "created"
        self.candidates: dict[int, list[EditResult]] = {}
        self.gt_view_id: int | None = None
        self.gt_image: ViewImage | None = None
        self.gt_from_override = False
        self.schedule = None
        self.prop_state: PropagationState | None = None
        self.loss_log: list[dict] = []
        self.edits: dict[int, ViewImage] = {}
        self.lifted_scene: SplatScene | None = None
        self._render_cache: dict[int, ViewImage] = {}

        cfg = self.config
        self.model = EditorModel(
            seed=derive_seed(self.rng_seed, "base-model"),
            adapter_seed=derive_seed(self.rng_seed, "adapters"),
            num_denoise_steps=cfg.num_denoise_steps,
            rank=cfg.adapter_rank,
            alpha=cfg.adapter_alpha,
            lr=cfg.lr,
            betas=(cfg.beta1, cfg.beta2),
            weight_decay=cfg.weight_decay,
            eps=cfg.eps,
            init_noise_level=cfg.init_noise_level,
            adapter_init_std=cfg.adapter_init_std,
            mv_adapter_init_std=cfg.mv_adapter_init_std,
        )

    # -- phase bookkeeping ----------------------------------------------------

    def _require_phase(self, required: str):
        if self.phase != required:
            raise PhaseError(
                f"operation requires phase '{required}', session is in '{self.phase}'",
                required_phase=required,
            )

    def _advance(self, new_phase: str):
        if phase_index(new_phase) <= phase_index(self.phase):
            raise PhaseError(f"cannot move phase backward ({self.phase} -> {new_phase})")
        self.phase = new_phase

    def camera_for(self, view_id: int) -> Camera:
        for cam in self.cameras:
            if cam.id == view_id:
                return cam
        raise ValidationError(f"unknown view id {view_id}")

    def render_view(self, view_id: int) -> ViewImage:
        # Rendering is pure, so per-view results are cached for the session.
        if view_id not in self._render_cache:
            self._render_cache[view_id] = render(self.scene, self.camera_for(view_id))
        return self._render_cache[view_id]

    def _log(self, record: dict):
        self.loss_log.append(record)
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(self.directory / "loss_log.jsonl", "a") as fh:
                fh.write(json.dumps(record) + "\n")

    def _emit(self, progress_cb: ProgressCallback | None, **info):
        if progress_cb is not None:
            progress_cb({"phase": self.phase, **info})

    # -- phase 1: candidates and GT selection ---------------------------------

    def generate_candidates(self, progress_cb: ProgressCallback | None = None) -> None:
        """Independent base-model edit of every view for every candidate seed."""
        self._require_phase("created")
        total = len(self.cameras) * len(self.config.candidate_seeds)
        done = 0
        for cam in self.cameras:
            try:
                rendered = self.render_view(cam.id)
                for seed in self.config.candidate_seeds:
                    result = edit(self.model, rendered, self.prompt, seed, pass_label="candidate")
                    result.image = ViewImage(cam.id, quantize(result.image.pixels))
                    self.candidates.setdefault(cam.id, []).append(result)
                    done += 1
                    self._emit(progress_cb, iteration=done, total=total, view_id=cam.id)
            except (NumericFault, ValidationError) as exc:
                raise type(exc)(f"candidate generation failed for view {cam.id}: {exc}") from exc
        self._advance("candidates_ready")

    def select_gt(
        self,
        view_id: int,
        override_image=None,
        candidate_seed: int | None = None,
    ) -> None:
        """Pin the optimization target: a candidate edit or an uploaded image."""
        self._require_phase("candidates_ready")
        if view_id not in self.candidates:
            raise ValidationError(f"view {view_id} has no candidates")
        cam = self.camera_for(view_id)
        width, height = cam.resolution
        if override_image is not None:
            pixels = (
                override_image.pixels
                if isinstance(override_image, ViewImage)
                else np.asarray(override_image, dtype=np.float64)
            )
            if pixels.shape != (height, width, 3):
                raise ValidationError(
                    f"override image shape {pixels.shape[1]}x{pixels.shape[0]} does not "
                    f"match view resolution {width}x{height}"
                )
            gt = ViewImage(view_id, quantize(pixels))
            self.gt_from_override = True
        else:
            pool = self.candidates[view_id]
            if candidate_seed is None:
                chosen = pool[0]
            else:
                matches = [c for c in pool if c.provenance["seed"] == candidate_seed]
                if not matches:
                    raise ValidationError(
                        f"view {view_id} has no candidate with seed {candidate_seed}"
                    )
                chosen = matches[0]
            gt = chosen.image
            self.gt_from_override = False
        self.gt_view_id = view_id
        self.gt_image = gt
        self.schedule = build_schedule(self._schedule_cameras(), view_id)
        self._advance("gt_selected")

    def _schedule_cameras(self) -> list[Camera]:
        subset = self.config.view_subset
        if subset is None:
            return self.cameras
        wanted = set(subset) | ({self.gt_view_id} if self.gt_view_id is not None else set())
        return [cam for cam in self.cameras if cam.id in wanted]

    # -- phase 2: GT fitting ---------------------------------------------------

    def fit_gt(self, progress_cb: ProgressCallback | None = None) -> None:
        """Train the gt adapter bank so fresh edits of the GT view reproduce
        the chosen GT image."""
        self._require_phase("gt_selected")
        cfg = self.config
        self.model.set_trainable("gt")
        weights = cfg.loss_weights
        gt_tensor = torch.from_numpy(self.gt_image.pixels)
        for i in range(cfg.intra_iters):
            rendered = self.render_view(self.gt_view_id)
            seed = derive_seed(self.rng_seed, "fit", i)
            edited = self.model.edit_tensor(rendered, self.prompt, seed)
            terms = intra_loss_terms(edited, gt_tensor, weights)
            loss = terms["total"]
            if torch.isnan(loss):
                raise NumericFault(f"NaN intra loss at iteration {i}")
            loss.backward()
            self.model.optimizer_step()
            self._log(
                {
                    "phase": "fit",
                    "iteration": i,
                    "view_id": self.gt_view_id,
                    "loss": float(loss.detach()),
                    "components": {
                        "l1": float(terms["l1"].detach()),
                        "perceptual": float(terms["perceptual"].detach()),
                        "loss2": None,
                        "loss3": None,
                    },
                    "direction": None,
                }
            )
            self._emit(
                progress_cb, iteration=i + 1, total=cfg.intra_iters, latest_loss=float(loss.detach())
            )
        self.model.set_trainable("none")
        self._advance("gt_fitted")

    # -- phase 3: propagation ----------------------------------------------------

    def _visit_plan(self) -> list[int]:
        if self.config.propagation_order == "distance":
            ordered = self.schedule.ordered
        else:
            non_gt = list(self.schedule.ordered[1:])
            rng = np.random.default_rng(derive_seed(self.rng_seed, "prop-order"))
            ordered = (self.schedule.gt_view_id, *(int(v) for v in rng.permutation(non_gt)))
        return visits_from_ordered(ordered)

    def propagate(self, progress_cb: ProgressCallback | None = None) -> None:
        """Visit views outward from the GT view (then back), training the
        mv adapter bank toward per-view targets, the closest processed
        view's edit and the GT edit."""
        self._require_phase("gt_fitted")
        cfg = self.config
        bank = "mv" if cfg.adapter_mode == "dual" else "gt"
        self.model.set_trainable(bank)
        # Propagation is a new optimization problem; the training bank gets a
        # fresh optimizer state regardless of which bank it is.
        self.model.reset_optimizer(bank)
        weights = cfg.loss_weights
        self.prop_state = PropagationState(self.gt_view_id, self.gt_image)
        visits = self._visit_plan()
        forward_count = len(self.schedule.ordered) - 1
        gt_tensor = torch.from_numpy(self.gt_image.pixels)
        counter = 0
        # Seeds are keyed by (view, visit occurrence), not by position in the
        # plan, so runs that differ only in visiting order consume identical
        # noise for each view.
        occurrence: dict[int, int] = {}
        for visit_idx, view_id in enumerate(visits):
            occ = occurrence.get(view_id, 0)
            occurrence[view_id] = occ + 1
            direction = "forward" if visit_idx < forward_count else "reverse"
            rendered = self.render_view(view_id)
            with torch.no_grad():
                target_tensor = self.model.edit_tensor(
                    rendered, self.prompt,
                    derive_seed(self.rng_seed, "prop-target", view_id, occ),
                )
            anchor_id = closest_processed(
                self.prop_state, self.schedule, view_id, exclude_self=True
            )
            record_edit(self.prop_state, view_id, ViewImage(view_id, target_tensor.numpy()))
            target = torch.from_numpy(self.prop_state.stored_edits[view_id].pixels)
            anchor = torch.from_numpy(self.prop_state.stored_edits[anchor_id].pixels)
            for t in range(cfg.inter_iters_per_view):
                seed = derive_seed(self.rng_seed, "prop-train", view_id, occ, t)
                edited = self.model.edit_tensor(rendered, self.prompt, seed)
                terms = inter_loss_terms(edited, target, anchor, gt_tensor, weights)
                loss = terms["total"]
                if torch.isnan(loss):
                    raise NumericFault(
                        f"NaN inter loss at visit {visit_idx} (view {view_id})"
                    )
                loss.backward()
                self.model.optimizer_step()
                self._log(
                    {
                        "phase": "propagate",
                        "iteration": counter,
                        "view_id": view_id,
                        "loss": float(loss.detach()),
                        "components": {
                            "l1": float(terms["l1"].detach()),
                            "perceptual": float(terms["perceptual"].detach()),
                            "loss2": float(terms["loss2"].detach()),
                            "loss3": float(terms["loss3"].detach()),
                        },
                        "direction": direction,
                    }
                )
                counter += 1
            self.prop_state.current_visit_index = visit_idx + 1
            self._emit(
                progress_cb,
                iteration=visit_idx + 1,
                total=len(visits),
                view_id=view_id,
                direction=direction,
                latest_loss=float(loss.detach()),
            )
        self.model.set_trainable("none")
        self._advance("propagated")

    # -- final edits and lifting ----------------------------------------------

    def edit_all_views(self, progress_cb: ProgressCallback | None = None) -> dict[int, ViewImage]:
        """One deterministic edit per view with the trained model."""
        self._require_phase("propagated")
        seed = derive_seed(self.rng_seed, "final-edit")
        results: dict[int, ViewImage] = {}
        for i, cam in enumerate(self.cameras):
            rendered = self.render_view(cam.id)
            with torch.no_grad():
                out = self.model.edit_tensor(rendered, self.prompt, seed)
            results[cam.id] = ViewImage(cam.id, quantize(out.numpy()))
            self._emit(progress_cb, iteration=i + 1, total=len(self.cameras), view_id=cam.id)
        self.edits = results
        self._advance("edited")
        return results

    def lift_to_3d(
        self,
        masks: dict[int, np.ndarray] | None = None,
        progress_cb: ProgressCallback | None = None,
    ) -> SplatScene:
        """Optimize splat colors (and optionally positions) so renders match
        the per-view edited images; round-robin over views."""
        self._require_phase("edited")
        cfg = self.config
        scene = self.scene
        colors = torch.tensor(scene.colors, dtype=torch.float64, requires_grad=True)
        positions = torch.tensor(scene.positions, dtype=torch.float64,
                                 requires_grad=cfg.lift_positions)
        opacities = torch.from_numpy(scene.opacities)
        radii = torch.from_numpy(scene.radii)
        background = torch.from_numpy(scene.background)
        params = [colors] + ([positions] if cfg.lift_positions else [])
        optimizer = torch.optim.Adam(params, lr=cfg.lift_lr)

        targets = {vid: torch.from_numpy(img.pixels) for vid, img in self.edits.items()}
        mask_tensors: dict[int, torch.Tensor] = {}
        if masks:
            for vid, mask in masks.items():
                cam = self.camera_for(vid)
                width, height = cam.resolution
                arr = np.asarray(mask, dtype=np.float64)
                if arr.shape != (height, width):
                    raise ValidationError(
                        f"mask for view {vid} has shape {arr.shape}, expected {(height, width)}"
                    )
                mask_tensors[vid] = torch.from_numpy((arr > 0.5).astype(np.float64))

        view_ids = [cam.id for cam in self.cameras]
        initial_loss: dict[int, float] = {}
        for step in range(cfg.lift_steps):
            view_id = view_ids[step % len(view_ids)]
            cam = self.camera_for(view_id)
            image = render_tensors(positions, colors, opacities, radii, cam, background)
            diff = (image - targets[view_id]).abs()
            if view_id in mask_tensors:
                mask = mask_tensors[view_id]
                support = float(mask.sum()) * 3.0
                if support == 0.0:
                    self._emit(progress_cb, iteration=step + 1, total=cfg.lift_steps,
                               view_id=view_id, latest_loss=0.0)
                    continue
                loss = (diff * mask.unsqueeze(-1)).sum() / support
            else:
                loss = diff.mean()
            value = float(loss.detach())
            if not np.isfinite(value):
                raise NumericFault(f"non-finite lifting loss at step {step}")
            baseline = initial_loss.setdefault(view_id, value)
            if value > 10.0 * baseline and value > 1e-12:
                raise NumericFault(
                    f"divergent lifting loss at step {step}: {value} > 10 x {baseline}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            with torch.no_grad():
                colors.clamp_(0.0, 1.0)
            self._emit(progress_cb, iteration=step + 1, total=cfg.lift_steps,
                       view_id=view_id, latest_loss=value)

        lifted = scene.copy()
        lifted.colors = colors.detach().numpy()
        if cfg.lift_positions:
            lifted.positions = positions.detach().numpy()
        lifted.validate()
        self.lifted_scene = lifted
        self._advance("lifted")
        return lifted

    # -- composition -------------------------------------------------------------

    def run_all(
        self,
        gt_choice,
        masks: dict[int, np.ndarray] | None = None,
        progress_cb: ProgressCallback | None = None,
    ) -> None:
        """Drive the session from its current phase to 'lifted'.

        ``gt_choice`` is a view id, a (view_id, override_image) pair, or a
        callable taking the session and returning either of those.
        """
        if self.phase == "created":
            self.generate_candidates(progress_cb)
            self._checkpoint()
        if self.phase == "candidates_ready":
            choice = gt_choice(self) if callable(gt_choice) else gt_choice
            if isinstance(choice, tuple):
                view_id, override = choice
            else:
                view_id, override = choice, None
            self.select_gt(view_id, override_image=override)
            self._checkpoint()
        if self.phase == "gt_selected":
            self.fit_gt(progress_cb)
            self._checkpoint()
        if self.phase == "gt_fitted":
            self.propagate(progress_cb)
            self._checkpoint()
        if self.phase == "propagated":
            self.edit_all_views(progress_cb)
            self._checkpoint()
        if self.phase == "edited":
            self.lift_to_3d(masks=masks, progress_cb=progress_cb)
            self._checkpoint()

    def _checkpoint(self):
        if self.directory is not None:
            self.save()

    def eval_report(self) -> dict:
        if phase_index(self.phase) < phase_index("edited"):
            raise PhaseError(
                "eval requires phase 'edited' or later", required_phase="edited"
            )
        view_ids = [cam.id for cam in self.cameras]
        rendered = [self.render_view(vid) for vid in view_ids]
        edited = [self.edits[vid] for vid in view_ids]
        report = build_report(rendered, edited, self.prompt, view_ids=view_ids)
        if self.directory is not None:
            with open(self.directory / "report.json", "w") as fh:
                json.dump(report, fh, indent=1)
        return report

    # -- persistence ---------------------------------------------------------------

    def save(self) -> None:
        if self.directory is None:
            raise ValidationError("session has no directory to save into")
        directory = self.directory
        directory.mkdir(parents=True, exist_ok=True)
        scene_file = directory / "scene.json"
        if not scene_file.exists():
            save_scene(scene_file, self.scene, self.cameras)
        with open(directory / "config.json", "w") as fh:
            json.dump(self.config.to_dict(), fh, indent=1)

        if self.candidates:
            cand_dir = directory / "candidates"
            cand_dir.mkdir(exist_ok=True)
            index = []
            for view_id, pool in sorted(self.candidates.items()):
                for result in pool:
                    seed = result.provenance["seed"]
                    name = f"view{view_id}_seed{seed}.png"
                    path = cand_dir / name
                    if not path.exists():
                        save_png(path, result.image.pixels)
                    index.append(
                        {"view_id": view_id, "seed": seed, "file": f"candidates/{name}"}
                    )
            with open(cand_dir / "index.json", "w") as fh:
                json.dump(index, fh, indent=1)

        if self.gt_image is not None:
            save_png(directory / "gt.png", self.gt_image.pixels)
        self.model.save_adapters(directory / "adapters.npz")
        if self.edits:
            edit_dir = directory / "edits"
            edit_dir.mkdir(exist_ok=True)
            for view_id, img in sorted(self.edits.items()):
                save_png(edit_dir / f"view{view_id}.png", img.pixels)
        if self.lifted_scene is not None:
            save_scene(directory / "lifted_scene.json", self.lifted_scene, self.cameras)

        manifest = {
            "format_version": MANIFEST_VERSION,
            "session_id": self.session_id,
            "phase": self.phase,
            "prompt": self.prompt,
            "rng_seed": self.rng_seed,
            "scene_file": "scene.json",
            "gt_view_id": self.gt_view_id,
            "gt_from_override": self.gt_from_override,
            "candidate_seeds": list(self.config.candidate_seeds),
            "created_at": self.created_at,
            "updated_at": time.time(),
        }
        tmp = directory / "manifest.json.tmp"
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=1)
        tmp.replace(directory / "manifest.json")

    @classmethod
    def load(cls, directory: str | Path) -> "EditSession":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            raise ParseError(f"{directory} is not a session directory (no manifest.json)")
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        if manifest.get("format_version") != MANIFEST_VERSION:
            raise ParseError("unsupported session manifest version")
        with open(directory / "config.json") as fh:
            config = RunConfig.from_dict(json.load(fh))
        scene, cameras = load_scene(directory / manifest["scene_file"])
        session = cls(
            scene,
            cameras,
            manifest["prompt"],
            manifest["rng_seed"],
            config=config,
            directory=directory,
        )
        session.session_id = manifest["session_id"]
        session.created_at = manifest.get("created_at", session.created_at)
        phase = manifest["phase"]
        verify_artifacts(directory, phase)

        if phase_index(phase) >= phase_index("candidates_ready"):
            with open(directory / "candidates" / "index.json") as fh:
                index = json.load(fh)
            for entry in index:
                pixels = load_png(directory / entry["file"])
                view_id = int(entry["view_id"])
                session.candidates.setdefault(view_id, []).append(
                    EditResult(
                        image=ViewImage(view_id, pixels),
                        provenance={
                            "view_id": view_id,
                            "prompt": session.prompt,
                            "seed": int(entry["seed"]),
                            "pass_label": "candidate",
                        },
                    )
                )
        if phase_index(phase) >= phase_index("gt_selected"):
            session.gt_view_id = int(manifest["gt_view_id"])
            session.gt_from_override = bool(manifest.get("gt_from_override", False))
            session.gt_image = ViewImage(session.gt_view_id, load_png(directory / "gt.png"))
            session.schedule = build_schedule(session._schedule_cameras(), session.gt_view_id)
        adapters = directory / "adapters.npz"
        if adapters.exists():
            session.model.load_adapters(adapters)
        if phase_index(phase) >= phase_index("edited"):
            for cam in session.cameras:
                path = directory / "edits" / f"view{cam.id}.png"
                session.edits[cam.id] = ViewImage(cam.id, load_png(path))
        if phase_index(phase) >= phase_index("lifted"):
            lifted, _ = load_scene(directory / "lifted_scene.json")
            session.lifted_scene = lifted
        log_path = directory / "loss_log.jsonl"
        if log_path.exists():
            with open(log_path) as fh:
                session.loss_log = [json.loads(line) for line in fh if line.strip()]
        session.phase = phase
        return session


def verify_artifacts(directory: Path, phase: str) -> None:
    """Check that on-disk artifacts match the manifest phase."""
    requirements = {
        "candidates_ready": ["candidates/index.json"],
        "gt_selected": ["gt.png"],
        "gt_fitted": ["adapters.npz"],
        "propagated": ["adapters.npz"],
        "edited": ["edits"],
        "lifted": ["lifted_scene.json"],
    }
    idx = phase_index(phase)
    for marker_phase, paths in requirements.items():
        if idx >= phase_index(marker_phase):
            for rel in paths:
                if not (directory / rel).exists():
                    raise ParseError(
                        f"manifest says phase '{phase}' but artifact '{rel}' is missing"
                    )


def resume(
    directory: str | Path,
    from_phase: str | None = None,
    gt_choice=None,
    masks: dict[int, np.ndarray] | None = None,
    progress_cb: ProgressCallback | None = None,
) -> EditSession:
    """Load a persisted session and drive it to 'lifted'.

    Asking to resume from a phase the session has already completed is a
    no-op for that phase (with a notice); execution continues from the
    session's actual phase.
    """
    session = EditSession.load(directory)
    if from_phase is not None:
        if phase_index(from_phase) < phase_index(session.phase):
            log.info(
                "phase '%s' already completed (session is at '%s'); continuing from there",
                from_phase,
                session.phase,
            )
    if session.phase == "lifted":
        log.info("session already lifted; nothing to resume")
        return session
    if session.phase == "candidates_ready" and gt_choice is None:
        raise PhaseError(
            "resume needs a gt_choice to pass the selection phase",
            required_phase="gt_selected",
        )
    session.run_all(gt_choice, masks=masks, progress_cb=progress_cb)
    return session
