"""Minimal PGM/PPM reading and writing.

Only the netpbm variants needed here: P2 (ASCII graymap), P5 (binary
graymap) for input, P5 and P6 (binary pixmap) for output.
"""

import numpy as np

from .errors import MapFormatError


def _tokens(data: bytes, count: int):
    """Return ``count`` header tokens and the offset just past the last one."""
    tokens = []
    i, n = 0, len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i >= n:
            raise MapFormatError("truncated header")
        if data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a P2 or P5 image to a uint8 array (row 0 = top), scaled to 0..255."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise MapFormatError("not a P2/P5 PGM file")
    (magic, w, h, maxval), end = _tokens(data, 4)
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MapFormatError(f"malformed header: {exc}") from None
    if width <= 0 or height <= 0:
        raise MapFormatError(f"zero dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise MapFormatError(f"bad maxval {maxval}")
    npix = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        raster = data[end + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(raster) < npix * dtype.itemsize:
            raise MapFormatError("truncated raster data")
        pixels = np.frombuffer(raster, dtype=dtype, count=npix).astype(np.int64)
    else:
        body = data[end:].split()
        if len(body) < npix:
            raise MapFormatError("truncated raster data")
        try:
            pixels = np.array([int(t) for t in body[:npix]], dtype=np.int64)
        except ValueError as exc:
            raise MapFormatError(f"bad pixel value: {exc}") from None
    if pixels.max(initial=0) > maxval:
        raise MapFormatError("pixel value exceeds maxval")
    if maxval != 255:
        pixels = (pixels * 255 + maxval // 2) // maxval
    return pixels.reshape(height, width).astype(np.uint8)


def write_pgm(image: np.ndarray, comments=()) -> bytes:
    """Encode a 2-D uint8 array (row 0 = top) as binary P5."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    header = b"P5\n"
    for line in comments:
        header += b"# " + line.encode("ascii") + b"\n"
    header += f"{w} {h}\n255\n".encode("ascii")
    return header + image.tobytes()


def write_ppm(image: np.ndarray, comments=()) -> bytes:
    """Encode an (h, w, 3) uint8 array (row 0 = top) as binary P6."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w, _ = image.shape
    header = b"P6\n"
    for line in comments:
        header += b"# " + line.encode("ascii") + b"\n"
    header += f"{w} {h}\n255\n".encode("ascii")
    return header + image.tobytes()
