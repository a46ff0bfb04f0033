"""Binary PGM (P5) / PPM (P6) reading and writing, maxval 255."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ImageFormatError


def write_pnm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ImageFormatError(f"expected uint8 samples, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ImageFormatError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just past the single
    whitespace byte that follows the last one."""
    toks, i, n = [], 0, len(data)
    while len(toks) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise ImageFormatError("truncated header")
        toks.append(data[start:i])
    return toks, i + 1


def read_pnm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    toks, off = _tokens(data, 4)
    magic = toks[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: not a binary PGM/PPM (magic {magic!r})")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed header") from None
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    ch = 1 if magic == b"P5" else 3
    size = w * h * ch
    body = data[off:off + size]
    if len(body) != size:
        raise ImageFormatError(f"{path}: expected {size} sample bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape(h, w) if ch == 1 else arr.reshape(h, w, 3)
