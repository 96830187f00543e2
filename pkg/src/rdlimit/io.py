"""File formats: binary PGM input, CSV results, RDLB containers, run manifests.

PGM grammar accepted by :func:`parse_pgm`::

    "P5" WS width WS height WS maxval ONE-WS raster

``WS`` is one or more of space, tab, CR, LF, VT, FF, and may contain
``#`` comments running to the end of the line. ``width``, ``height`` and
``maxval`` are decimal integers of at most 9 digits; ``width`` and
``height`` are positive, ``maxval`` is in ``[1, 65535]``. The raster holds
``width*height`` samples, one byte each when ``maxval < 256`` and two
big-endian bytes otherwise. Trailing bytes after the raster are ignored.

RDLB container (little-endian)::

    offset  size  field
    0       4     magic b"RDLB"
    4       1     version (1)
    5       1     payload kind: 1 = transform basis, 2 = context weights
    6       2     reserved, zero
    8       4     u32 block_size (kind 1) or neighbour count k (kind 2)
    12      4     u32 rows
    16      4     u32 cols
    20      8*2k  kind 2 only: k pairs of i32 (drow, dcol)
    ...     8*r*c float64 matrix, row-major
"""
import csv
import hashlib
import io as _io
import json
import struct
from pathlib import Path

import numpy as np

from .context import ContextModelSpec
from .exceptions import InvalidArgumentError, PGMParseError
from .transforms import TransformSpec

_WS = b" \t\r\n\x0b\x0c"
MAGIC = b"RDLB"
CONTAINER_VERSION = 1
KIND_BASIS = 1
KIND_CONTEXT = 2
_HEADER = struct.Struct("<4sBBHIII")

CSV_HEADERS = {
    "gap-curve": ("variance", "rate_uniform_bits", "rate_optimal_bits", "gap_bits"),
    "waterfill": ("source_index", "variance", "distortion", "rate_bits", "water_level"),
    "channel-verify": ("signal_variance", "noise_variance", "eta", "mi_bits",
                       "mi_stderr_bits", "mi_theory_bits", "output_variance",
                       "output_variance_stderr", "mse", "mse_theory"),
    "correlation": ("rho", "rate_independent_bits", "rate_correlated_bits",
                    "overestimate_bits"),
    "rd-sweep": ("budget", "latent_rate_bps", "rate_bpp", "mse", "psnr_db"),
    "ablation": ("component", "budget", "latent_rate_bps", "rate_bpp", "mse", "psnr_db"),
}


# -- PGM ---------------------------------------------------------------------

def _skip_ws(data, pos):
    start = pos
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch in _WS:
            pos += 1
        else:
            break
    if pos == start:
        raise PGMParseError("expected whitespace", offset=pos)
    return pos


def _read_int(data, pos, name):
    start = pos
    while pos < len(data) and 0x30 <= data[pos] <= 0x39:
        pos += 1
    if pos == start:
        raise PGMParseError(f"expected decimal {name}", offset=start)
    if pos - start > 9:
        raise PGMParseError(f"{name} too large", offset=start)
    return int(data[start:pos]), pos


def parse_pgm(data):
    """Parse binary PGM bytes into a float image normalised to ``[0, 1]``."""
    data = bytes(data)
    magic = data[:2]
    if magic != b"P5":
        if magic in (b"P3", b"P6"):
            raise PGMParseError("colour PPM is not supported; convert to 8- or 16-bit "
                                "grayscale PGM first", offset=0)
        if magic in (b"P1", b"P2", b"P4"):
            raise PGMParseError(f"unsupported Netpbm variant {magic.decode()}; only "
                                "binary P5 is accepted", offset=0)
        raise PGMParseError("not a binary PGM (missing P5 magic)", offset=0)
    pos = _skip_ws(data, 2)
    width, pos = _read_int(data, pos, "width")
    pos = _skip_ws(data, pos)
    height, pos = _read_int(data, pos, "height")
    pos = _skip_ws(data, pos)
    maxval_at = pos
    maxval, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PGMParseError(f"image dimensions must be positive, got {width}x{height}",
                            offset=maxval_at)
    if not 1 <= maxval <= 65535:
        raise PGMParseError(f"unsupported maxval {maxval}", offset=maxval_at)
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise PGMParseError("expected single whitespace before raster", offset=pos)
    pos += 1
    depth = 1 if maxval < 256 else 2
    need = width * height * depth
    have = len(data) - pos
    if have < need:
        raise PGMParseError(f"truncated raster: need {need} bytes, have {have}",
                            offset=pos + have)
    dtype = np.uint8 if depth == 1 else np.dtype(">u2")
    raw = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    if raw.max(initial=0) > maxval:
        bad = int(np.argmax(raw > maxval))
        raise PGMParseError(f"sample exceeds maxval {maxval}", offset=pos + bad * depth)
    return raw.reshape(height, width).astype(np.float64) / maxval


def load_image(path):
    """Read a binary PGM file."""
    path = Path(path)
    return parse_pgm(path.read_bytes())


def encode_pgm(image, maxval=255):
    """Serialise a ``[0, 1]`` image as binary PGM bytes (rounded, clipped)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise InvalidArgumentError("PGM images must be 2-D")
    if not 1 <= maxval <= 65535:
        raise InvalidArgumentError(f"unsupported maxval {maxval}")
    q = np.clip(np.rint(image * maxval), 0, maxval)
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    h, w = image.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode() + q.astype(dtype).tobytes()


def save_image(path, image, maxval=255):
    Path(path).write_bytes(encode_pgm(image, maxval))


def bundled_images():
    """Names of the grayscale test images shipped with the package."""
    data_dir = Path(__file__).parent / "data"
    return sorted(p.stem for p in data_dir.glob("*.pgm"))


def load_bundled(name):
    return load_image(Path(__file__).parent / "data" / f"{name}.pgm")


# -- CSV ---------------------------------------------------------------------

def format_value(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def csv_text(rows, header):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise InvalidArgumentError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(rows, path, header):
    """Write rows as UTF-8 CSV with floats at 17 significant digits.

    ``header`` is either a column tuple or a command name from
    :data:`CSV_HEADERS`.
    """
    if isinstance(header, str):
        header = CSV_HEADERS[header]
    text = csv_text(rows, header)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path):
    """Read a results CSV back; numeric fields become floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for v in row:
                try:
                    parsed.append(float(v))
                except ValueError:
                    parsed.append(v)
            rows.append(tuple(parsed))
    return tuple(header), rows


# -- RDLB container ------------------------------------------------------------

def _pack(kind, field, matrix, extra=b""):
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = matrix.shape
    return (_HEADER.pack(MAGIC, CONTAINER_VERSION, kind, 0, field, rows, cols)
            + extra + matrix.tobytes())


def _unpack(data, expected_kind):
    if len(data) < _HEADER.size:
        raise InvalidArgumentError("container too short")
    magic, version, kind, _, field, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InvalidArgumentError("bad container magic")
    if version != CONTAINER_VERSION:
        raise InvalidArgumentError(f"unsupported container version {version}")
    if kind != expected_kind:
        raise InvalidArgumentError(f"container holds payload kind {kind}, "
                                   f"expected {expected_kind}")
    return field, rows, cols, _HEADER.size


def _matrix(data, pos, rows, cols):
    need = pos + 8 * rows * cols
    if len(data) != need:
        raise InvalidArgumentError(f"container payload is {len(data)} bytes, expected {need}")
    return np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols).astype(np.float64)


def encode_basis(spec):
    if spec.basis is None:
        raise InvalidArgumentError("transform has no basis to store")
    return _pack(KIND_BASIS, spec.block_size, spec.basis)


def decode_basis(data, kind="klt"):
    block_size, rows, cols, pos = _unpack(data, KIND_BASIS)
    basis = _matrix(data, pos, rows, cols)
    return TransformSpec(kind, block_size, basis)


def encode_context(spec):
    if spec.coefficients is None:
        raise InvalidArgumentError("context model has no fitted coefficients")
    k = len(spec.neighborhood)
    offsets = struct.pack(f"<{2*k}i", *[v for off in spec.neighborhood for v in off])
    return _pack(KIND_CONTEXT, k, spec.coefficients, offsets)


def decode_context(data):
    k, rows, cols, pos = _unpack(data, KIND_CONTEXT)
    if cols != k:
        raise InvalidArgumentError("context weight columns do not match neighbour count")
    end = pos + 8 * k
    if len(data) < end:
        raise InvalidArgumentError("container too short for neighbour offsets")
    flat = struct.unpack_from(f"<{2*k}i", data, pos)
    nb = tuple(zip(flat[0::2], flat[1::2]))
    return ContextModelSpec("causal_lsq", nb, _matrix(data, end, rows, cols))


def save_basis(path, spec):
    Path(path).write_bytes(encode_basis(spec))


def load_basis(path):
    return decode_basis(Path(path).read_bytes())


def save_context(path, spec):
    Path(path).write_bytes(encode_context(spec))


def load_context(path):
    return decode_context(Path(path).read_bytes())


# -- manifests ---------------------------------------------------------------

def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(output_path):
    output_path = Path(output_path)
    return output_path.with_name(output_path.name + ".manifest.json")


def write_manifest(output_path, command, config, input_paths=(), seed=0, argv=None):
    """Write the resolved run description next to ``output_path``.

    ``argv`` is the command line without ``--output``; ``rdlimit rerun``
    replays it. Contains no timestamps or host details, so identical runs
    produce identical manifests.
    """
    from . import __version__

    doc = {
        "argv": list(argv) if argv is not None else None,
        "command": command,
        "config": config,
        "input_paths": [str(p) for p in input_paths],
        "input_sha256": [file_digest(p) for p in input_paths],
        "output_path": str(output_path),
        "seed": seed,
        "toolkit_version": __version__,
    }
    path = manifest_path(output_path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: not a manifest ({exc})") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("argv"), list):
        raise InvalidArgumentError(f"{path}: manifest has no replayable argv")
    return doc
