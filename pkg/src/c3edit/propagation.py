"""View scheduling for the propagation phase.

Views are sorted by camera-center distance from the GT view; the visit plan
walks that sequence outward and then back (excluding the just-visited
farthest view and the GT view itself). Distance ties always break by
ascending view id so schedules are deterministic under camera-list shuffles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .scene import Camera, ViewImage, camera_distance


@dataclass(frozen=True)
class ViewSchedule:
    gt_view_id: int
    ordered: tuple[int, ...]  # gt first, then ascending distance
    distances: tuple[float, ...]  # parallel to `ordered`
    cameras: dict[int, Camera] = field(repr=False)


def build_schedule(cameras: list[Camera], gt_view_id: int) -> ViewSchedule:
    by_id = {cam.id: cam for cam in cameras}
    if len(by_id) != len(cameras):
        raise ValidationError("camera ids must be unique")
    if gt_view_id not in by_id:
        raise ValidationError(f"unknown GT view id {gt_view_id}")
    gt_cam = by_id[gt_view_id]
    rest = sorted(
        (cam for cam in cameras if cam.id != gt_view_id),
        key=lambda cam: (camera_distance(gt_cam, cam), cam.id),
    )
    ordered = (gt_view_id, *(cam.id for cam in rest))
    distances = (0.0, *(camera_distance(gt_cam, cam) for cam in rest))
    return ViewSchedule(
        gt_view_id=gt_view_id, ordered=ordered, distances=distances, cameras=by_id
    )


def visits_from_ordered(ordered) -> list[int]:
    """Forward pass over ordered[1:], then the reverse pass from the
    second-farthest view back down to (but excluding) the first entry."""
    ordered = tuple(ordered)
    forward = list(ordered[1:])
    reverse = list(ordered[len(ordered) - 2 : 0 : -1])
    return forward + reverse


def propagation_visits(schedule: ViewSchedule) -> list[int]:
    return visits_from_ordered(schedule.ordered)


class PropagationState:
    """Processed-view bookkeeping; the GT view's stored edit is immutable."""

    def __init__(self, gt_view_id: int, gt_image: ViewImage):
        self.gt_view_id = gt_view_id
        self.processed: set[int] = {gt_view_id}
        self.stored_edits: dict[int, ViewImage] = {gt_view_id: gt_image}
        self.current_visit_index = 0


def closest_processed(
    state: PropagationState,
    schedule: ViewSchedule,
    view_id: int,
    *,
    exclude_self: bool = False,
) -> int:
    """Processed view whose camera center is nearest to ``view_id``'s camera.

    Ties break by ascending view id. With ``exclude_self`` the query view is
    ignored even if it is already processed (the propagation loop uses this
    so a view is anchored to its nearest neighbor, never to itself).
    """
    if view_id not in schedule.cameras:
        raise ValidationError(f"unknown view id {view_id}")
    query_cam = schedule.cameras[view_id]
    candidates = [
        vid for vid in state.processed if not (exclude_self and vid == view_id)
    ]
    if not candidates:
        raise ValidationError("no processed views to anchor to")
    return min(
        candidates, key=lambda vid: (camera_distance(query_cam, schedule.cameras[vid]), vid)
    )


def record_edit(state: PropagationState, view_id: int, image: ViewImage) -> None:
    """Store a view's edit target; re-visits overwrite (latest wins),
    except the GT view which is immutable."""
    if view_id == state.gt_view_id:
        raise ValidationError("the GT view's stored edit is immutable")
    if not isinstance(image, ViewImage):
        raise ValidationError("record_edit expects a ViewImage")
    state.processed.add(view_id)
    state.stored_edits[view_id] = image
