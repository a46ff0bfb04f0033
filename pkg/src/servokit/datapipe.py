"""Corner labels, augmentation, splits and per-corner evaluation.

Label CSV schema: ``id,u1,v1,u2,v2,u3,v3,u4,v4,units`` with corners in
canonical order TL, TR, BR, BL and ``units`` either ``pixels`` or
``normalized``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AmbiguousOrderError, DatasetError, UnitMismatchError
from .prng import XorShift64Star

UNITS = ("pixels", "normalized")
LABEL_HEADER = ["id"] + [f"{c}{i}" for i in range(1, 5) for c in ("u", "v")] + ["units"]
AUG_OPS = ("rot180", "hflip", "vflip")


@dataclass(frozen=True, eq=False)
class LabeledImage:
    id: str
    corners: np.ndarray  # (4, 2)
    units: str = "pixels"

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        object.__setattr__(self, "corners", c)
        if self.units not in UNITS:
            raise UnitMismatchError(f"unknown units {self.units!r}")

    def same_as(self, other: LabeledImage) -> bool:
        return self.id == other.id and self.units == other.units and np.array_equal(self.corners, other.corners)


def reorder_canonical(points) -> np.ndarray:
    """Order 4 points as TL, TR, BR, BL.

    TL minimises u+v, BR maximises it; TR maximises u-v, BL minimises it.
    Exact ties go to smaller v, then smaller u. Raises
    :class:`AmbiguousOrderError` if one point wins two roles.
    """
    p = np.asarray(points, dtype=np.float64).reshape(4, 2)
    u, v = p[:, 0], p[:, 1]
    s, d = u + v, u - v
    roles = [
        int(np.lexsort((u, v, s))[0]),
        int(np.lexsort((u, v, -d))[0]),
        int(np.lexsort((u, v, -s))[0]),
        int(np.lexsort((u, v, d))[0]),
    ]
    if len(set(roles)) != 4:
        raise AmbiguousOrderError(f"corner roles collide for points {p.tolist()}")
    return p[roles]


def _map_labels(c: np.ndarray, op: str, width: int, height: int) -> np.ndarray:
    out = c.copy()
    if op in ("hflip", "rot180"):
        out[:, 0] = (width - 1) - c[:, 0]
    if op in ("vflip", "rot180"):
        out[:, 1] = (height - 1) - c[:, 1]
    return out


def augment_image(img: np.ndarray, op: str) -> np.ndarray:
    if op == "hflip":
        out = img[:, ::-1]
    elif op == "vflip":
        out = img[::-1]
    elif op == "rot180":
        out = img[::-1, ::-1]
    else:
        raise ValueError(f"unknown augmentation {op!r}; choose from {', '.join(AUG_OPS)}")
    return np.ascontiguousarray(out)


def augment(img: np.ndarray, item: LabeledImage, op: str, new_id: str | None = None):
    """Apply ``op`` to the image and its pixel labels, restoring canonical order."""
    if item.units != "pixels":
        raise UnitMismatchError("augment needs pixel labels; denormalize first")
    h, w = img.shape[:2]
    out_img = augment_image(img, op)
    corners = reorder_canonical(_map_labels(item.corners, op, w, h))
    return out_img, LabeledImage(new_id if new_id is not None else item.id, corners, "pixels")


def augmented_id(image_id: str, op: str) -> str:
    stem, dot, ext = image_id.rpartition(".")
    return f"{stem}_{op}.{ext}" if dot else f"{image_id}_{op}"


def augment_dataset(samples: Iterable[tuple[np.ndarray, LabeledImage]], ops: Sequence[str] = AUG_OPS):
    """Originals followed by one augmented copy per op, per sample."""
    out = []
    for img, item in samples:
        out.append((img, item))
        for op in ops:
            out.append(augment(img, item, op, augmented_id(item.id, op)))
    return out


def normalize_labels(item: LabeledImage, width: int, height: int) -> LabeledImage:
    if item.units != "pixels":
        raise UnitMismatchError(f"{item.id}: already normalized")
    return LabeledImage(item.id, item.corners / np.array([width, height], dtype=np.float64), "normalized")


def denormalize_labels(item: LabeledImage, width: int, height: int) -> LabeledImage:
    if item.units != "normalized":
        raise UnitMismatchError(f"{item.id}: labels are already in pixels")
    return LabeledImage(item.id, item.corners * np.array([width, height], dtype=np.float64), "pixels")


def read_labels(path: str | Path) -> list[LabeledImage]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != LABEL_HEADER:
        raise DatasetError(f"{path}: expected header {','.join(LABEL_HEADER)}")
    items, seen = [], set()
    for n, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != len(LABEL_HEADER):
            raise DatasetError(f"{path}:{n}: expected {len(LABEL_HEADER)} fields, got {len(r)}")
        if r[0] in seen:
            raise DatasetError(f"{path}:{n}: duplicate id {r[0]!r}")
        seen.add(r[0])
        try:
            coords = [float(x) for x in r[1:9]]
        except ValueError:
            raise DatasetError(f"{path}:{n}: non-numeric coordinate") from None
        items.append(LabeledImage(r[0], np.array(coords).reshape(4, 2), r[9].strip()))
    return items


def write_labels(path: str | Path, items: Iterable[LabeledImage]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_HEADER)
        for it in items:
            w.writerow([it.id] + [repr(float(x)) for x in it.corners.reshape(-1)] + [it.units])


def split_train_val(ids: Sequence[str], frac: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded shuffle; the first ``ceil(frac * n)`` ids become validation."""
    if not ids:
        raise DatasetError("cannot split an empty id list")
    if not 0 < frac < 1:
        raise ValueError("frac must lie in (0, 1)")
    order = list(ids)
    XorShift64Star(seed).shuffle(order)
    # Guard so 0.1 * 1600 style products do not round up past the intended count.
    n_val = math.ceil(frac * len(order) - 1e-9)
    return order[n_val:], order[:n_val]


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: dict = field(hash=False)  # id -> fold index
    order: tuple = ()  # ids in input order

    def fold(self, i: int) -> list[str]:
        return [x for x in self.order if self.assignment[x] == i]

    def rounds(self) -> list[tuple[list[str], list[str]]]:
        """``(train, test)`` per round; round ``i`` tests on fold ``i``."""
        return [([x for x in self.order if self.assignment[x] != i], self.fold(i)) for i in range(self.k)]

    def sizes(self) -> list[int]:
        return [len(self.fold(i)) for i in range(self.k)]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "fold"])
            for x in self.order:
                w.writerow([x, self.assignment[x]])


def kfold_partition(ids: Sequence[str], k: int = 7, seed: int = 0) -> FoldPlan:
    """Seeded shuffle, then deal ids round-robin into ``k`` folds."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(ids):
        raise DatasetError(f"k={k} exceeds the number of items ({len(ids)})")
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate ids")
    shuffled = list(ids)
    XorShift64Star(seed).shuffle(shuffled)
    assignment = {x: i % k for i, x in enumerate(shuffled)}
    return FoldPlan(k, seed, assignment, tuple(ids))


@dataclass(frozen=True)
class EvalReport:
    per_corner: tuple  # MAE per corner, normalized units
    overall: float
    worst_corner: int  # 1-based
    n_images: int

    def format(self) -> str:
        lines = [f"corner {i + 1}: {m:.6f}" for i, m in enumerate(self.per_corner)]
        lines.append(f"overall: {self.overall:.6f}")
        lines.append(f"worst corner: {self.worst_corner}")
        return "\n".join(lines)


def evaluate(pred: Sequence[LabeledImage], truth: Sequence[LabeledImage]) -> EvalReport:
    """Per-corner mean absolute error, averaged over u and v then over images."""
    p = {x.id: x for x in pred}
    t = {x.id: x for x in truth}
    if set(p) != set(t):
        missing = sorted(set(t) - set(p))[:5]
        extra = sorted(set(p) - set(t))[:5]
        raise DatasetError(f"prediction/truth ids differ (missing {missing}, extra {extra})")
    if not t:
        raise DatasetError("nothing to evaluate")
    for x in list(p.values()) + list(t.values()):
        if x.units != "normalized":
            raise UnitMismatchError(f"{x.id}: evaluation needs normalized labels")
    ids = sorted(t)
    err = np.array([np.abs(p[i].corners - t[i].corners) for i in ids])  # (n, 4, 2)
    per_corner = tuple(float(m) for m in err.mean(axis=2).mean(axis=0))
    overall = sum(per_corner) / 4
    return EvalReport(per_corner, overall, int(np.argmax(per_corner)) + 1, len(ids))
