"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""
import numpy as np


def _tokens(data, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PNM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(path):
    """Returns a float array in [0, 1]: (H, W) for P5, (H, W, 3) for P6."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), pos = _tokens(data, 4)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported format {magic!r} (need binary P5/P6)")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    channels = 1 if magic == b"P5" else 3
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return raster.reshape(shape).astype(np.float64) / 255.0


def to_gray(img):
    """Green channel for colour input (highest vessel contrast in fundus images)."""
    return img[..., 1] if img.ndim == 3 else img


def quantize(img):
    # round half up
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_pgm(path, img):
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantize(img).tobytes())


def write_ppm(path, img):
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantize(img).tobytes())
