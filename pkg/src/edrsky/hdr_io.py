"""Reading and writing HDR radiance images and tabular reports.

Images are ``(height, width, 3)`` float arrays of linear radiance.  Supported
containers:

* Radiance RGBE ``.hdr`` (new-style RLE and flat scanlines)
* PFM (``PF`` colour and ``Pf`` greyscale, either byte order)
* 8-bit PNG, export only, gamma 2.2 encoded
"""

import contextlib
import csv
import io
import os
import re
import tempfile

import numpy as np

__all__ = [
    "HdrFormatError",
    "read_hdr",
    "write_hdr",
    "read_rgbe",
    "write_rgbe",
    "read_pfm",
    "write_pfm",
    "write_png8",
    "write_label_png",
    "read_label_png",
    "rgbe_to_float",
    "float_to_rgbe",
    "write_report",
    "read_report",
    "atomic_write",
]

FORMATS = ("RGBE", "PFM", "PNG8")

_RES_RE = re.compile(rb"^([-+])Y\s+(\d+)\s+([-+])X\s+(\d+)\s*$")


# mkstemp creates 0600 files; finished outputs get the usual umask-based mode
_UMASK = os.umask(0)
os.umask(_UMASK)


class HdrFormatError(ValueError):
    """Raised for malformed or unsupported image files."""


@contextlib.contextmanager
def atomic_write(path, mode="wb"):
    """Open a temp file next to ``path`` and move it into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        os.chmod(tmp, 0o666 & ~_UMASK)
        newline = "" if "b" not in mode else None
        with os.fdopen(fd, mode, newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _check_image(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or infinite values")
    if np.any(img < 0):
        raise ValueError("image contains negative values")
    return img


def _format_from_path(path):
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext in (".hdr", ".rgbe", ".pic"):
        return "RGBE"
    if ext == ".pfm":
        return "PFM"
    if ext == ".png":
        return "PNG8"
    raise HdrFormatError(f"cannot infer image format from extension {ext!r}")


# --------------------------------------------------------------------------
# RGBE


def rgbe_to_float(rgbe):
    """Decode ``(..., 4)`` uint8 RGBE quadruples to float32 RGB.

    value = mantissa / 256 * 2**(exponent - 128); exponent byte 0 means black.
    """
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    e = rgbe[..., 3].astype(np.int32)
    scale = np.where(e > 0, np.ldexp(1.0, e - 136), 0.0)
    return (rgbe[..., :3].astype(np.float64) * scale[..., None]).astype(np.float32)


def float_to_rgbe(rgb):
    """Encode ``(..., 3)`` non-negative floats to uint8 RGBE with rounding."""
    rgb = np.asarray(rgb, dtype=np.float64)
    vmax = rgb.max(axis=-1)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    # values below 2**-128 underflow the exponent byte
    nz = vmax >= 2.0 ** -128
    _, e = np.frexp(vmax)
    m = np.floor(rgb * np.ldexp(256.0, -e)[..., None] + 0.5)
    # rounding can carry the largest mantissa to 256
    carry = nz & (m.max(axis=-1) > 255)
    e = np.where(carry, e + 1, e)
    m = np.where(carry[..., None], np.floor(rgb * np.ldexp(256.0, -e)[..., None] + 0.5), m)
    if np.any(nz & (e + 128 > 255)):
        raise ValueError("value too large for RGBE encoding")
    out[..., :3] = np.where(nz[..., None], np.clip(m, 0, 255), 0).astype(np.uint8)
    out[..., 3] = np.where(nz, e + 128, 0).astype(np.uint8)
    return out


def _read_header(fh):
    first = fh.readline()
    if not first.startswith(b"#?"):
        raise HdrFormatError("missing '#?' Radiance magic")
    fmt = None
    while True:
        line = fh.readline()
        if not line:
            raise HdrFormatError("unexpected end of file in header")
        line = line.strip()
        if not line:
            break
        if line.startswith(b"FORMAT="):
            fmt = line[len(b"FORMAT="):].decode("ascii", "replace")
    if fmt is not None and fmt != "32-bit_rle_rgbe":
        raise HdrFormatError(f"unsupported pixel format {fmt!r}")
    res = fh.readline()
    match = _RES_RE.match(res.strip())
    if match is None:
        raise HdrFormatError(f"unsupported resolution line {res!r}")
    ysign, h, xsign, w = match.groups()
    if xsign != b"+":
        raise HdrFormatError("only +X scanline orientation is supported")
    return int(h), int(w), ysign == b"+"


def _decode_rle_channel(data, pos, width, out):
    x = 0
    n = len(data)
    while x < width:
        if pos >= n:
            raise HdrFormatError("truncated RLE scanline")
        count = data[pos]
        pos += 1
        if count > 128:
            count -= 128
            if count == 0 or x + count > width or pos >= n:
                raise HdrFormatError("bad RLE run")
            out[x:x + count] = data[pos]
            pos += 1
        else:
            if count == 0 or x + count > width or pos + count > n:
                raise HdrFormatError("bad RLE literal")
            out[x:x + count] = np.frombuffer(data, np.uint8, count, pos)
            pos += count
        x += count
    return pos


def read_rgbe(path):
    with open(path, "rb") as fh:
        height, width, flip = _read_header(fh)
        data = fh.read()
    pix = np.empty((height, width, 4), dtype=np.uint8)
    pos = 0
    n = len(data)
    for y in range(height):
        if pos + 4 > n:
            raise HdrFormatError(f"truncated scanline {y}")
        is_rle = (
            8 <= width < 32768
            and data[pos] == 2
            and data[pos + 1] == 2
            and data[pos + 2] < 128
        )
        if is_rle:
            if (data[pos + 2] << 8 | data[pos + 3]) != width:
                raise HdrFormatError(f"scanline {y} width mismatch")
            pos += 4
            for c in range(4):
                pos = _decode_rle_channel(data, pos, width, pix[y, :, c])
        else:
            nbytes = 4 * width
            if pos + nbytes > n:
                raise HdrFormatError(f"truncated scanline {y}")
            pix[y] = np.frombuffer(data, np.uint8, nbytes, pos).reshape(width, 4)
            pos += nbytes
    img = rgbe_to_float(pix)
    if flip:
        img = img[::-1]
    return img


def _encode_rle_channel(row):
    """New-style RLE for one channel of one scanline."""
    out = bytearray()
    n = row.size
    # boundaries of runs of identical bytes
    change = np.flatnonzero(np.diff(row)) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [n])))
    long_runs = np.flatnonzero(lengths >= 4)
    cursor = 0
    raw = row.tobytes()
    for k in long_runs:
        start, length = int(starts[k]), int(lengths[k])
        while cursor < start:
            chunk = min(128, start - cursor)
            out.append(chunk)
            out += raw[cursor:cursor + chunk]
            cursor += chunk
        value = raw[start]
        while length > 0:
            chunk = min(127, length)
            if chunk < 4:
                out.append(chunk)
                out += raw[cursor:cursor + chunk]
            else:
                out.append(128 + chunk)
                out.append(value)
            cursor += chunk
            length -= chunk
    while cursor < n:
        chunk = min(128, n - cursor)
        out.append(chunk)
        out += raw[cursor:cursor + chunk]
        cursor += chunk
    return out


def write_rgbe(path, img, rle=True):
    img = _check_image(img)
    height, width = img.shape[:2]
    pix = float_to_rgbe(img)
    buf = io.BytesIO()
    buf.write(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
    buf.write(f"-Y {height} +X {width}\n".encode("ascii"))
    use_rle = rle and 8 <= width < 32768
    for y in range(height):
        if use_rle:
            buf.write(bytes((2, 2, width >> 8, width & 0xFF)))
            for c in range(4):
                buf.write(_encode_rle_channel(pix[y, :, c]))
        else:
            buf.write(pix[y].tobytes())
    with atomic_write(path) as fh:
        fh.write(buf.getvalue())


# --------------------------------------------------------------------------
# PFM


def read_pfm(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic not in (b"PF", b"Pf"):
            raise HdrFormatError("missing PFM magic")
        dims = fh.readline().split()
        scale_line = fh.readline().strip()
        try:
            width, height = int(dims[0]), int(dims[1])
            scale = float(scale_line)
        except (IndexError, ValueError) as exc:
            raise HdrFormatError("malformed PFM header") from exc
        if scale == 0:
            raise HdrFormatError("PFM scale must be non-zero")
        channels = 3 if magic == b"PF" else 1
        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * channels
        data = np.frombuffer(fh.read(4 * count), dtype=dtype)
    if data.size != count:
        raise HdrFormatError("truncated PFM data")
    img = data.reshape(height, width, channels)[::-1].astype(np.float32)
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    if not np.all(np.isfinite(img)):
        raise HdrFormatError("PFM contains NaN or infinite values")
    if np.any(img < 0):
        raise HdrFormatError("PFM contains negative radiance")
    return img


def write_pfm(path, img):
    img = _check_image(img)
    height, width = img.shape[:2]
    header = f"PF\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(img[::-1], dtype="<f4").tobytes()
    with atomic_write(path) as fh:
        fh.write(header + body)


# --------------------------------------------------------------------------
# PNG


def write_png8(path, img, gamma=2.2):
    """Gamma-encode, clamp to [0, 1] and save as 8-bit RGB PNG."""
    from PIL import Image

    img = _check_image(img)
    ldr = np.clip(np.power(img, 1.0 / gamma), 0.0, 1.0)
    arr = np.round(ldr * 255.0).astype(np.uint8)
    with atomic_write(path) as fh:
        Image.fromarray(arr, mode="RGB").save(fh, format="PNG")


def write_label_png(path, labels):
    from PIL import Image

    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    with atomic_write(path) as fh:
        Image.fromarray(labels.astype(np.uint8), mode="L").save(fh, format="PNG")


def read_label_png(path):
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


# --------------------------------------------------------------------------
# dispatch


def read_hdr(path):
    """Read an RGBE or PFM file as a float32 ``(H, W, 3)`` array."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"#?":
        return read_rgbe(path)
    if head in (b"PF", b"Pf"):
        return read_pfm(path)
    raise HdrFormatError(f"{os.fspath(path)}: not an RGBE or PFM file")


def write_hdr(img, path, format=None):
    """Write ``img`` as RGBE, PFM or PNG8 (inferred from the extension)."""
    fmt = (format or _format_from_path(path)).upper()
    if fmt == "RGBE":
        write_rgbe(path, img)
    elif fmt == "PFM":
        write_pfm(path, img)
    elif fmt == "PNG8":
        write_png8(path, img)
    else:
        raise ValueError(f"unknown format {format!r}, expected one of {FORMATS}")


# --------------------------------------------------------------------------
# reports


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer, np.bool_)):
        return str(value.item())
    return str(value)


def write_report(rows, path, columns=None):
    """Write dict rows as CSV.

    Column order is ``columns`` if given, else the key order of the first row
    followed by any new keys in order of appearance.  Floats are written with
    ``repr`` so they parse back exactly.
    """
    rows = list(rows)
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    with atomic_write(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])


def _parse(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_report(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: _parse(v) for k, v in row.items()} for row in reader]
