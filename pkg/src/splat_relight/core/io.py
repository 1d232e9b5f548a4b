"""Image file IO: PFM for linear HDR data, PNG for 8-bit sRGB display.

PFM files are little-endian (negative scale), scanlines bottom-to-top as in
the original spec. Cubemaps are stored as six PFM faces with the suffixes
+x, -x, +y, -y, +z, -z inserted before the extension.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .color import linear_to_srgb
from .cubemap import FACE_NAMES, Cubemap
from .types import Image


def pfm_bytes(img):
    """Serialize a 1- or 3-channel float image as PFM (little-endian)."""
    arr = img.to_array() if isinstance(img, Image) else np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    if c not in (1, 3):
        raise ValueError(f"PFM supports 1 or 3 channels, got {c}")
    header = b"Pf\n" if c == 1 else b"PF\n"
    # bottom-to-top scanline order
    return header + f"{w} {h}\n".encode() + b"-1.0\n" + np.flipud(arr).astype("<f4").tobytes()


def write_pfm(path, img):
    with open(path, "wb") as f:
        f.write(pfm_bytes(img))


def read_pfm(path):
    """Read a PFM file into an Image."""
    with open(path, "rb") as f:
        ident = _read_token(f)
        if ident == b"PF":
            channels = 3
        elif ident == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: not a PFM file (header {ident!r})")
        w = int(_read_token(f))
        h = int(_read_token(f))
        scale = float(_read_token(f))
        fmt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * channels * 4), dtype=fmt).astype(np.float32)
    arr = np.flipud(data.reshape(h, w, channels))
    return Image.from_array(arr * abs(scale) if abs(scale) != 1.0 else arr)


def _read_token(f):
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("unexpected end of PFM header")
        if c in b" \n\r\t":
            if tok:
                return tok
            continue
        tok += c


def _png_image(img, assume_linear=True):
    arr = img.to_array() if isinstance(img, Image) else np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] == 4:
        rgb, alpha = arr[:, :, :3], np.clip(arr[:, :, 3:], 0.0, 1.0)
        rgb = linear_to_srgb(rgb) if assume_linear else np.clip(rgb, 0, 1)
        out = np.concatenate([rgb, alpha], axis=2)
        mode = "RGBA"
    elif arr.shape[2] == 3:
        out = linear_to_srgb(arr) if assume_linear else np.clip(arr, 0, 1)
        mode = "RGB"
    elif arr.shape[2] == 1:
        out = linear_to_srgb(arr) if assume_linear else np.clip(arr, 0, 1)
        out = np.repeat(out, 3, axis=2)
        mode = "RGB"
    else:
        raise ValueError(f"cannot write {arr.shape[2]}-channel image as PNG")
    quantized = np.round(out * 255.0).astype(np.uint8)
    return PILImage.fromarray(quantized, mode=mode)


def write_png(path, img, assume_linear=True):
    """Write an image as 8-bit PNG; linear input is gamma-encoded first.

    3-channel input becomes RGB, 4-channel becomes RGBA (the alpha channel
    is clipped but not gamma-encoded).
    """
    _png_image(img, assume_linear).save(path)


def png_bytes(img, assume_linear=True):
    import io as _io

    buf = _io.BytesIO()
    _png_image(img, assume_linear).save(buf, format="PNG")
    return buf.getvalue()


def read_png(path):
    """Read an 8-bit PNG into a [0,1] float array (no gamma decode)."""
    with PILImage.open(path) as im:
        arr = np.asarray(im).astype(np.float32) / 255.0
    return arr


def cubemap_face_paths(prefix):
    """The six per-face PFM paths for a cubemap path prefix."""
    p = Path(prefix)
    stem = p.name[: -len(p.suffix)] if p.suffix else p.name
    suffix = p.suffix or ".pfm"
    return [p.with_name(f"{stem}{name}{suffix}") for name in FACE_NAMES]


def write_cubemap(prefix, cubemap):
    paths = cubemap_face_paths(prefix)
    for face, path in enumerate(paths):
        write_pfm(path, cubemap.faces[face])
    return paths


def read_cubemap(prefix):
    faces = []
    for path in cubemap_face_paths(prefix):
        if not Path(path).exists():
            raise FileNotFoundError(f"missing cubemap face file: {path}")
        faces.append(read_pfm(path).to_array())
    return Cubemap(np.stack(faces))


def write_lut_pfm(path, table):
    """Serialize a [H, W, 2] scale/bias table as a 3-channel PFM (blue = 0)."""
    t = np.asarray(table, dtype=np.float32)
    rgb = np.concatenate([t, np.zeros_like(t[..., :1])], axis=-1)
    write_pfm(path, rgb)


def read_lut_pfm(path):
    arr = read_pfm(path).to_array()
    return arr[..., :2].copy()
