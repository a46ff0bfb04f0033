"""Shape propagation and parameter counts for the modified VGG-19 corner regressor.

Only shapes and counts are computed; no tensors are built.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

INPUT_SHAPE = (180, 320, 3)


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv2d | pool2d | flatten | dense
    units: int = 0  # filters for conv2d, units for dense
    kernel: tuple = (3, 3)
    stride: tuple = (1, 1)
    padding: str = "same"
    pool_mode: str = "avg"
    name: str = ""

    @classmethod
    def conv(cls, filters, name=""):
        return cls("conv2d", filters, (3, 3), (1, 1), "same", name=name)

    @classmethod
    def pool(cls, mode="avg", name=""):
        return cls("pool2d", 0, (2, 2), (2, 2), "valid", mode, name=name)

    @property
    def label(self) -> str:
        if self.kind == "conv2d":
            return "Convolution 2D"
        if self.kind == "pool2d":
            return "Average Pooling 2D" if self.pool_mode == "avg" else "Max Pooling 2D"
        return self.kind.capitalize()


def _out_len(n, k, s, padding):
    if padding == "same":
        return -(-n // s)
    return (n - k) // s + 1


def propagate_shape(layer: LayerSpec, shape: Sequence[int]) -> tuple:
    shape = tuple(int(x) for x in shape)
    if layer.kind in ("conv2d", "pool2d"):
        if len(shape) != 3:
            raise ShapeError(f"{layer.kind} needs [h, w, c], got {list(shape)}")
        h, w, c = shape
        kh, kw = layer.kernel
        sh, sw = layer.stride
        if layer.kind == "pool2d" and (h < sh or w < sw):
            raise ShapeError(f"spatial dims {h}x{w} smaller than pool stride {sh}x{sw}")
        oh = _out_len(h, kh, sh, layer.padding)
        ow = _out_len(w, kw, sw, layer.padding)
        if oh < 1 or ow < 1:
            raise ShapeError(f"{layer.kind} collapses {h}x{w}")
        return (oh, ow, layer.units if layer.kind == "conv2d" else c)
    if layer.kind == "flatten":
        if len(shape) != 3:
            raise ShapeError(f"flatten needs [h, w, c], got {list(shape)}")
        h, w, c = shape
        return (h * w * c, 1)
    if layer.kind == "dense":
        if len(shape) != 2:
            raise ShapeError(f"dense needs [n, 1], got {list(shape)}")
        return (layer.units, 1)
    raise ShapeError(f"unknown layer kind {layer.kind!r}")


def param_count(layer: LayerSpec, shape_in: Sequence[int]) -> int:
    """Weights plus biases."""
    if layer.kind == "conv2d":
        kh, kw = layer.kernel
        return kh * kw * shape_in[2] * layer.units + layer.units
    if layer.kind == "dense":
        return shape_in[0] * layer.units + layer.units
    return 0


_BLOCKS = ((64, 2), (128, 2), (256, 4), (512, 4), (512, 4))


def build_modified_vgg19(pool_mode: str = "avg", outputs: int = 8) -> list[LayerSpec]:
    """16 conv + 5 pool + flatten + dense(outputs); ``pool_mode`` is ``avg`` or ``max``."""
    if pool_mode not in ("avg", "max"):
        raise ValueError("pool_mode must be 'avg' or 'max'")
    layers = []
    for b, (filters, n) in enumerate(_BLOCKS, start=1):
        layers += [LayerSpec.conv(filters, f"block{b}_conv{i}") for i in range(1, n + 1)]
        layers.append(LayerSpec.pool(pool_mode, f"block{b}_pool"))
    layers.append(LayerSpec("flatten", name="flatten"))
    layers.append(LayerSpec("dense", outputs, name="dense"))
    return layers


def shape_table(arch: Sequence[LayerSpec], input_shape=INPUT_SHAPE) -> list[tuple[tuple, tuple]]:
    rows, shape = [], tuple(input_shape)
    for layer in arch:
        out = propagate_shape(layer, shape)
        rows.append((shape, out))
        shape = out
    return rows


# Transcribed (input, output) rows of the published architecture table.
PUBLISHED_SHAPES = [
    ((180, 320, 3), (180, 320, 64)),
    ((180, 320, 64), (180, 320, 64)),
    ((180, 320, 64), (90, 160, 64)),
    ((90, 160, 64), (90, 160, 128)),
    ((90, 160, 128), (90, 160, 128)),
    ((90, 160, 128), (45, 80, 128)),
    ((45, 80, 128), (45, 80, 256)),
    ((45, 80, 256), (45, 80, 256)),
    ((45, 80, 256), (45, 80, 256)),
    ((45, 80, 256), (45, 80, 256)),
    ((45, 80, 256), (22, 40, 256)),
    ((22, 40, 256), (22, 40, 512)),
    ((22, 40, 512), (22, 40, 512)),
    ((22, 40, 512), (22, 40, 512)),
    ((22, 40, 512), (22, 40, 512)),
    ((22, 40, 512), (11, 20, 512)),
    ((11, 20, 512), (11, 20, 512)),
    ((11, 20, 512), (11, 20, 512)),
    ((11, 20, 512), (11, 20, 512)),
    ((11, 20, 512), (11, 20, 512)),
    ((11, 20, 512), (5, 10, 512)),
    ((5, 10, 512), (25600, 1)),
    ((25600, 1), (8, 1)),
]


@dataclass
class TableReport:
    rows: list  # (layer, input, output, expected_in, expected_out, ok)
    first_mismatch: int | None  # 0-based row index
    trainable_params: int  # dense head
    frozen_params: int  # convolutional base

    @property
    def ok(self) -> bool:
        return self.first_mismatch is None

    def format(self) -> str:
        out = io.StringIO()
        out.write(f"{'#':>2}  {'layer':<20} {'input':<16} {'output':<16} check\n")
        for i, (layer, si, so, _, _, ok) in enumerate(self.rows, start=1):
            out.write(f"{i:>2}  {layer.label:<20} {str(list(si)):<16} {str(list(so)):<16} "
                      f"{'ok' if ok else 'MISMATCH'}\n")
        out.write(f"trainable (dense head): {self.trainable_params}\n")
        out.write(f"frozen (conv base): {self.frozen_params}\n")
        if self.ok:
            out.write("verdict: all rows match\n")
        else:
            layer = self.rows[self.first_mismatch][0]
            out.write(f"verdict: first mismatch at row {self.first_mismatch + 1} ({layer.name})\n")
        return out.getvalue()


def verify_table(arch: Sequence[LayerSpec], expected=PUBLISHED_SHAPES, input_shape=INPUT_SHAPE) -> TableReport:
    """Compare propagated shapes with ``expected`` (input, output) rows.

    Mismatches, including length differences, are reported, not raised.
    """
    rows, first = [], None
    shape = tuple(input_shape)
    trainable = frozen = 0
    for i, layer in enumerate(arch):
        try:
            out = propagate_shape(layer, shape)
        except ShapeError:
            out = ()
        exp_in, exp_out = expected[i] if i < len(expected) else ((), ())
        ok = tuple(shape) == tuple(exp_in) and tuple(out) == tuple(exp_out)
        if not ok and first is None:
            first = i
        rows.append((layer, shape, out, exp_in, exp_out, ok))
        n = param_count(layer, shape) if out else 0
        if layer.kind == "dense":
            trainable += n
        else:
            frozen += n
        if not out:
            break
        shape = out
    if first is None and len(expected) != len(arch):
        first = min(len(expected), len(arch))
    return TableReport(rows, first, trainable, frozen)


def arch_csv(arch: Sequence[LayerSpec], input_shape=INPUT_SHAPE) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["index", "name", "kind", "units", "kernel", "stride", "padding", "pool_mode", "input", "output",
                "params"])
    for i, (layer, (si, so)) in enumerate(zip(arch, shape_table(arch, input_shape)), start=1):
        w.writerow([i, layer.name, layer.kind, layer.units,
                    "x".join(map(str, layer.kernel)) if layer.kind in ("conv2d", "pool2d") else "",
                    "x".join(map(str, layer.stride)) if layer.kind in ("conv2d", "pool2d") else "",
                    layer.padding if layer.kind in ("conv2d", "pool2d") else "",
                    layer.pool_mode if layer.kind == "pool2d" else "",
                    "x".join(map(str, si)), "x".join(map(str, so)), param_count(layer, si)])
    return out.getvalue()


@dataclass(frozen=True)
class LrSchedule:
    initial: float = 1e-5
    decay_factor: float = 0.95
    decay_every: int = 2500

    def __post_init__(self):
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Staircase decay: ``initial * factor ** (step // decay_every)``."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return schedule.initial * schedule.decay_factor ** (step // schedule.decay_every)
