"""Image, raw-array and manifest files.

Graymaps are binary PGM (``P5``) at 8 or 16 bits.  Float data goes to raw
little-endian float32 with a ``key = value`` sidecar next to it
(``name.f32`` and ``name.f32.txt``).
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

_RANGE_TAG = re.compile(r"#\s*turbforward\s+offset=(\S+)\s+scale=(\S+)")


class ImageFormatError(ValueError):
    """Malformed or unsupported image file."""


# -- PGM ------------------------------------------------------------------------------


def _tokens(data: bytes, count: int) -> tuple[list[bytes], list[str], int]:
    """First ``count`` whitespace-separated header tokens, comments and the data offset."""
    tokens, comments = [], []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ImageFormatError("truncated header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos:end].decode("ascii", "replace"))
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError("missing whitespace after header")
    return tokens, comments, pos + 1


def read_pgm(path: str | Path) -> tuple[np.ndarray, int, tuple[float, float] | None]:
    """Raw samples (``uint16``), the maxval, and the value range tag if present."""
    data = Path(path).read_bytes()
    tokens, comments, offset = _tokens(data, 4)
    if tokens[0] != b"P5":
        raise ImageFormatError(f"not a binary graymap (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("non-numeric header field") from exc
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width} x {height}")
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = width * height * dtype.itemsize
    raster = data[offset : offset + need]
    if len(raster) != need:
        raise ImageFormatError(f"expected {need} raster bytes, found {len(raster)}")
    samples = np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(np.uint16)
    if samples.max(initial=0) > maxval:
        raise ImageFormatError("sample exceeds maxval")
    tag = None
    for comment in comments:
        match = _RANGE_TAG.match(comment)
        if match:
            tag = (float(match.group(1)), float(match.group(2)))
    return samples, maxval, tag


def write_pgm(path: str | Path, samples: np.ndarray, maxval: int, comment: str | None = None) -> Path:
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("graymap samples must be 2-D")
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    if samples.min(initial=0) < 0 or samples.max(initial=0) > maxval:
        raise ValueError("samples out of range")
    dtype = "u1" if maxval == 255 else ">u2"
    header = "P5\n"
    if comment:
        header += f"# {comment}\n"
    header += f"{samples.shape[1]} {samples.shape[0]}\n{maxval}\n"
    path = Path(path)
    path.write_bytes(header.encode("ascii") + np.ascontiguousarray(samples, dtype=dtype).tobytes())
    return path


def read_image(path: str | Path) -> np.ndarray:
    """Graymap as float64.

    Samples are divided by maxval, then mapped back through the
    ``offset``/``scale`` tag that :func:`write_image` leaves for data outside
    ``[0, 1]``.
    """
    samples, maxval, tag = read_pgm(path)
    image = samples.astype(float) / maxval
    if tag is not None:
        offset, scale = tag
        image = offset + scale * image
    return image


def write_image(
    path: str | Path, image, bits: int = 16, value_range: tuple[float, float] | None = None
) -> list[Path]:
    """Write a graymap preview plus the exact float32 raw data.

    Values in ``value_range`` map linearly (no gamma) onto the full sample
    range, clamping outside it.  By default the range is ``[0, 1]`` when the
    data fits there and the data's own min/max otherwise; in the second
    case the header carries an ``offset``/``scale`` tag so the preview reads
    back in data units.  Returns the paths written (graymap, raw, sidecar).
    """
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 2:
        raise ValueError("image must be 2-D")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    maxval = 255 if bits == 8 else 65535
    comment = None
    if value_range is None:
        lo, hi = float(arr.min()), float(arr.max())
        if lo >= 0.0 and hi <= 1.0:
            value_range = (0.0, 1.0)
        else:
            value_range = (lo, hi if hi > lo else lo + 1.0)
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("value_range must be increasing")
    if (lo, hi) != (0.0, 1.0):
        comment = f"turbforward offset={lo!r} scale={hi - lo!r}"
    samples = np.rint(np.clip((arr - lo) / (hi - lo), 0.0, 1.0) * maxval)
    path = Path(path)
    preview = write_pgm(path.with_suffix(".pgm"), samples.astype(np.uint16), maxval, comment)
    raw, sidecar = write_raw(path.with_suffix(".f32"), arr)
    return [preview, raw, sidecar]


# -- raw float32 ------------------------------------------------------------------------


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".txt")


def write_raw(path: str | Path, array) -> tuple[Path, Path]:
    """Little-endian float32 in C order, with a sidecar giving the shape."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    path = Path(path)
    path.write_bytes(arr.tobytes())
    lines = ["dtype = float32", "byte_order = little", "order = C", f"ndim = {arr.ndim}"]
    if arr.ndim == 2:
        lines += [f"height = {arr.shape[0]}", f"width = {arr.shape[1]}"]
    lines.append("shape = " + ",".join(str(n) for n in arr.shape))
    header = sidecar_path(path)
    header.write_text("\n".join(lines) + "\n")
    return path, header


def read_sidecar(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, sep, value = line.partition("=")
        if sep:
            out[key.strip()] = value.strip()
    return out


def read_raw(path: str | Path) -> np.ndarray:
    header = read_sidecar(sidecar_path(path))
    if header.get("dtype") != "float32" or header.get("byte_order") != "little":
        raise ImageFormatError(f"unsupported raw layout {header}")
    shape = tuple(int(n) for n in header["shape"].split(","))
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ImageFormatError(f"raw file holds {data.size} values, sidecar says {shape}")
    return data.reshape(shape).astype(float)


# -- key/value reports ------------------------------------------------------------------


def format_scalar(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_key_values(path: str | Path, items, header: str | None = None) -> Path:
    """``key: value`` lines in the given order."""
    lines = [f"# {header}"] if header else []
    lines += [f"{key}: {format_scalar(value)}" for key, value in items]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_key_values(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if sep:
            out[key.strip()] = value.strip()
    return out


def write_variance_table(path: str | Path, variances: dict[int, float], scale: float | None = None) -> Path:
    """Per-mode variances as ``mode_<j>: value`` lines, optionally with the strength factor."""
    items = [(f"mode_{j}", float(v)) for j, v in sorted(variances.items())]
    if scale is not None:
        items.insert(0, ("d_over_r0_pow_5_3", float(scale)))
    return write_key_values(path, items, header="Zernike coefficient variance per Noll mode")


def write_table(path: str | Path, rows: list[dict], columns: list[str]) -> Path:
    """Whitespace-separated table with a header row."""
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(format_scalar(row[c]) for c in columns))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


# -- manifest ---------------------------------------------------------------------------


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    path: str | Path,
    header: list[tuple[str, object]],
    files: list[Path],
    root: str | Path | None = None,
) -> Path:
    """Header ``key: value`` lines followed by ``file.<name>: sha256:<hex>`` per output.

    ``files`` are listed relative to ``root`` (default: the manifest's
    directory) in sorted order, so the manifest depends only on content.
    """
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    rels = sorted(Path(f).resolve().relative_to(root.resolve()).as_posix() for f in files)
    items = list(header) + [(f"file.{rel}", f"sha256:{file_digest(root / rel)}") for rel in rels]
    return write_key_values(path, items, header="turbforward run manifest")


def verify_manifest(path: str | Path) -> list[str]:
    """Names of listed files whose content no longer matches; empty when intact."""
    path = Path(path)
    bad = []
    for key, value in read_key_values(path).items():
        if not key.startswith("file."):
            continue
        rel = key[len("file.") :]
        target = path.parent / rel
        if not target.exists() or f"sha256:{file_digest(target)}" != value:
            bad.append(rel)
    return bad
