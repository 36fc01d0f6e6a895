"""Single-channel rasters, deterministic ink-only drawing, PNG I/O, resampling.

Convention: background 0, ink 255. Primitives only ever write 255, so the
final pixel set does not depend on draw order. Nothing is anti-aliased.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

INK = 255
MIN_VISIBLE_RADIUS = 0.75

# Pixel-centre probe offset used by the polygon fill. It resolves centres that
# fall exactly on an edge the same way regardless of edge orientation
# (a fixed half-open rule), so adjacent unit-width strokes do not double up.
_PROBE_DX = 1.0e-7
_PROBE_DY = 1.3e-7


@dataclass(eq=False)
class GrayRaster:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} != ({self.height}, {self.width})"
            )

    def __eq__(self, other):
        if not isinstance(other, GrayRaster):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def copy(self) -> GrayRaster:
        return GrayRaster(self.width, self.height, self.pixels.copy())

    def ink_count(self) -> int:
        return int(np.count_nonzero(self.pixels))


def new_raster(w: int, h: int) -> GrayRaster:
    if w < 1 or h < 1:
        raise ValueError(f"raster size must be at least 1x1, got {w}x{h}")
    return GrayRaster(w, h, np.zeros((h, w), dtype=np.uint8))


def fill_circle(r: GrayRaster, cx: float, cy: float, radius: float) -> GrayRaster:
    """Set every pixel whose centre is within max(radius, 0.75) of (cx, cy)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    rad = max(radius, MIN_VISIBLE_RADIUS)
    x0 = max(0, int(math.floor(cx - rad - 0.5)))
    x1 = min(r.width, int(math.ceil(cx + rad + 0.5)))
    y0 = max(0, int(math.floor(cy - rad - 0.5)))
    y1 = min(r.height, int(math.ceil(cy + rad + 0.5)))
    if x0 >= x1 or y0 >= y1:
        return r
    xs = np.arange(x0, x1) + 0.5 - cx
    ys = np.arange(y0, y1) + 0.5 - cy
    inside = xs[None, :] ** 2 + ys[:, None] ** 2 <= rad * rad
    r.pixels[y0:y1, x0:x1][inside] = INK
    return r


def fill_convex_polygon(r: GrayRaster, pts: Sequence[tuple[float, float]]) -> GrayRaster:
    """Fill a convex polygon by pixel-centre inclusion; zero-area polygons draw nothing."""
    p = np.asarray(pts, dtype=np.float64)
    # shoelace area fixes the orientation of the edge tests
    area2 = float(np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))
    if area2 == 0.0:
        return r
    sign = 1.0 if area2 > 0 else -1.0
    x0 = max(0, int(math.floor(p[:, 0].min())) - 1)
    x1 = min(r.width, int(math.ceil(p[:, 0].max())) + 1)
    y0 = max(0, int(math.floor(p[:, 1].min())) - 1)
    y1 = min(r.height, int(math.ceil(p[:, 1].max())) + 1)
    if x0 >= x1 or y0 >= y1:
        return r
    qx = (np.arange(x0, x1) + 0.5 + _PROBE_DX)[None, :]
    qy = (np.arange(y0, y1) + 0.5 + _PROBE_DY)[:, None]
    inside = np.ones((y1 - y0, x1 - x0), dtype=bool)
    n = len(p)
    for i in range(n):
        ax, ay = p[i]
        bx, by = p[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        if ex == 0.0 and ey == 0.0:
            continue
        cross = ex * (qy - ay) - ey * (qx - ax)
        inside &= sign * cross >= 0.0
    r.pixels[y0:y1, x0:x1][inside] = INK
    return r


def wedge_corners(head, w_head, tail, w_tail) -> list[tuple[float, float]]:
    hx, hy = float(head[0]), float(head[1])
    tx, ty = float(tail[0]), float(tail[1])
    dx, dy = tx - hx, ty - hy
    length = math.hypot(dx, dy)
    if length == 0.0:
        raise ValueError("degenerate wedge: head and tail coincide")
    nx, ny = -dy / length, dx / length
    a, b = w_head / 2.0, w_tail / 2.0
    return [
        (hx + nx * a, hy + ny * a),
        (tx + nx * b, ty + ny * b),
        (tx - nx * b, ty - ny * b),
        (hx - nx * a, hy - ny * a),
    ]


def fill_wedge(r: GrayRaster, head, w_head: float, tail, w_tail: float) -> GrayRaster:
    """Fill the trapezoid whose width runs linearly from w_head at head to w_tail at tail."""
    if w_head < 0 or w_tail < 0:
        raise ValueError("wedge widths must be >= 0")
    head = (float(head[0]), float(head[1]))
    tail = (float(tail[0]), float(tail[1]))
    # canonical endpoint order makes head<->tail swaps bit-identical
    if tail < head:
        head, tail, w_head, w_tail = tail, head, w_tail, w_head
    return fill_convex_polygon(r, wedge_corners(head, w_head, tail, w_tail))


def stroke_polygon(r: GrayRaster, points: Sequence[tuple[float, float]], thickness: float = 1.0) -> GrayRaster:
    """Draw the closed ring through ``points`` with constant-width wedges."""
    if len(points) < 2:
        raise ValueError("stroke_polygon needs at least 2 points")
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    segs = [(points[i], points[(i + 1) % len(points)]) for i in range(len(points))]
    segs = [(a, b) for a, b in segs if tuple(a) != tuple(b)]
    if not segs:
        raise ValueError("degenerate wedge: all polygon points coincide")
    for a, b in segs:
        fill_wedge(r, a, thickness, b, thickness)
    return r


# --- PNG -------------------------------------------------------------------

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


class PNGError(ValueError):
    pass


def _chunk(kind: bytes, data: bytes) -> bytes:
    return (struct.pack(">I", len(data)) + kind + data
            + struct.pack(">I", zlib.crc32(data, zlib.crc32(kind)) & 0xFFFFFFFF))


def encode_png(r: GrayRaster) -> bytes:
    """8-bit grayscale, non-interlaced, filter type 0 on every row."""
    header = struct.pack(">IIBBBBB", r.width, r.height, 8, 0, 0, 0, 0)
    raw = np.zeros((r.height, r.width + 1), dtype=np.uint8)
    raw[:, 1:] = r.pixels
    return (_PNG_SIG + _chunk(b"IHDR", header)
            + _chunk(b"IDAT", zlib.compress(raw.tobytes(), 9))
            + _chunk(b"IEND", b""))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(data: bytes, width: int, height: int, bpp: int) -> np.ndarray:
    stride = width * bpp
    if len(data) != height * (stride + 1):
        raise PNGError(f"decompressed size {len(data)} != expected {height * (stride + 1)}")
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int64)
    for y in range(height):
        ftype = data[y * (stride + 1)]
        line = np.frombuffer(data, np.uint8, stride, y * (stride + 1) + 1).astype(np.int64)
        if ftype == 0:
            cur = line
        elif ftype == 2:
            cur = (line + prev) & 0xFF
        elif ftype in (1, 3, 4):
            # left-dependent filters are sequential
            lv, pv = line.tolist(), prev.tolist()
            cv = [0] * stride
            for i in range(stride):
                a = cv[i - bpp] if i >= bpp else 0
                b = pv[i]
                c = pv[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    pred = a
                elif ftype == 3:
                    pred = (a + b) >> 1
                else:
                    pred = _paeth(a, b, c)
                cv[i] = (lv[i] + pred) & 0xFF
            cur = np.array(cv, dtype=np.int64)
        else:
            raise PNGError(f"unknown filter type {ftype} on row {y}")
        out[y] = cur
        prev = cur
    return out


def decode_image(data: bytes) -> GrayRaster:
    """Decode an 8-bit grayscale or RGB PNG; RGB goes through integer luma."""
    if not data.startswith(_PNG_SIG):
        raise PNGError("not a PNG file (bad signature)")
    pos = len(_PNG_SIG)
    ihdr = None
    idat = []
    while True:
        if pos + 8 > len(data):
            raise PNGError("truncated chunk header")
        length, kind = struct.unpack(">I4s", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + length]
        if len(body) != length or pos + 12 + length > len(data):
            raise PNGError(f"truncated {kind!r} chunk")
        (crc,) = struct.unpack(">I", data[pos + 8 + length:pos + 12 + length])
        if zlib.crc32(body, zlib.crc32(kind)) & 0xFFFFFFFF != crc:
            raise PNGError(f"CRC mismatch in {kind!r} chunk")
        pos += 12 + length
        if kind == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif kind == b"IDAT":
            idat.append(body)
        elif kind == b"IEND":
            break
    if ihdr is None:
        raise PNGError("missing IHDR")
    width, height, depth, ctype, comp, filt, interlace = ihdr
    if depth != 8 or ctype not in (0, 2) or interlace != 0 or comp != 0 or filt != 0:
        raise PNGError(
            f"unsupported PNG (bit depth {depth}, colour type {ctype}, interlace {interlace}); "
            "only 8-bit non-interlaced grayscale or RGB is accepted"
        )
    if width < 1 or height < 1:
        raise PNGError("empty image")
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as e:
        raise PNGError(f"corrupt image data: {e}") from None
    bpp = 1 if ctype == 0 else 3
    rows = _unfilter(raw, width, height, bpp)
    if ctype == 0:
        return GrayRaster(width, height, rows)
    rgb = rows.reshape(height, width, 3).astype(np.int64)
    # round-half-up of 0.299R + 0.587G + 0.114B in exact integer arithmetic
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return GrayRaster(width, height, luma.astype(np.uint8))


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 array; used to produce RGB fixtures."""
    h, w, _ = rgb.shape
    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = np.zeros((h, w * 3 + 1), dtype=np.uint8)
    raw[:, 1:] = rgb.reshape(h, w * 3)
    return (_PNG_SIG + _chunk(b"IHDR", header)
            + _chunk(b"IDAT", zlib.compress(raw.tobytes()))
            + _chunk(b"IEND", b""))


# --- network input ---------------------------------------------------------

def _area_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) matrix averaging source cells over each destination cell."""
    scale = src / dst
    m = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(math.floor(lo)), min(src, int(math.ceil(hi)))
        for j in range(j0, j1):
            m[i, j] = min(hi, j + 1) - max(lo, j)
    return m / m.sum(axis=1, keepdims=True)


_AREA_CACHE: dict[tuple[int, int], np.ndarray] = {}


def to_input(r: GrayRaster, side: int, invert: bool = False) -> np.ndarray:
    """Pad to a centred square, area-average to side x side, scale to [0, 1].

    Returns a float64 array of shape (1, side, side).
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    s = max(r.width, r.height)
    square = np.zeros((s, s), dtype=np.float64)
    oy, ox = (s - r.height) // 2, (s - r.width) // 2
    square[oy:oy + r.height, ox:ox + r.width] = r.pixels
    key = (s, side)
    if key not in _AREA_CACHE:
        _AREA_CACHE[key] = _area_matrix(s, side)
    m = _AREA_CACHE[key]
    out = (m @ square @ m.T) / 255.0
    np.clip(out, 0.0, 1.0, out=out)
    if invert:
        out = 1.0 - out
    return out[None, :, :]
