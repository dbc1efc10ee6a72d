"""Single-file container for trained model state.

Layout: 8-byte magic, uint16 format version, 32-byte sha256 digest,
uint32 header length, a JSON header (metadata plus an array directory of
name/dtype/shape entries), then the raw array payloads in directory
order. The digest covers the header and payloads, so any flipped byte
after the digest field fails the load. Arrays round-trip bit-exactly;
two bundles are byte-identical iff their metadata and arrays are.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FORMAT_VERSION",
    "BundleError",
    "BundleVersionError",
    "BundleDigestError",
    "ModelBundle",
    "save_bundle",
    "load_bundle",
]

_MAGIC = b"ONCOTWIN"
FORMAT_VERSION = 1

# payload dtypes are pinned so a bundle means the same bytes everywhere
_ALLOWED_DTYPES = ("float64", "int64", "uint8")


class BundleError(RuntimeError):
    """The file is not a readable model bundle."""


class BundleVersionError(BundleError):
    """The bundle was written by an incompatible format version."""


class BundleDigestError(BundleError):
    """The bundle content does not match its recorded digest."""


@dataclass
class ModelBundle:
    """In-memory bundle: JSON-safe metadata plus named arrays."""

    meta: dict
    arrays: dict[str, np.ndarray]
    version: int = FORMAT_VERSION
    digest: str = field(default="", compare=False)


def _normalized(value) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype == np.float64 or arr.dtype == np.uint8:
        pass
    elif np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        arr = arr.astype(np.int64)
    elif np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    else:
        raise BundleError(f"cannot store arrays of dtype {arr.dtype}")
    return np.ascontiguousarray(arr)


def _encode(bundle: ModelBundle) -> tuple[bytes, bytes, str]:
    arrays = {name: _normalized(v) for name, v in sorted(bundle.arrays.items())}
    directory = [{"name": name, "dtype": str(a.dtype), "shape": list(a.shape)}
                 for name, a in arrays.items()]
    header = json.dumps({"meta": bundle.meta, "arrays": directory},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(a.tobytes() for a in arrays.values())
    digest = hashlib.sha256(header + payload).hexdigest()
    return header, payload, digest


def save_bundle(bundle: ModelBundle, path) -> str:
    """Write the bundle; returns its content digest (hex sha256)."""
    header, payload, digest = _encode(bundle)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bundle.version.to_bytes(2, "little"))
        fh.write(bytes.fromhex(digest))
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        fh.write(payload)
    bundle.digest = digest
    return digest


def load_bundle(path) -> ModelBundle:
    """Read and verify a bundle; digest or version mismatch rejects it."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 46 or blob[:8] != _MAGIC:
        raise BundleError(f"{path}: not a model bundle")
    version = int.from_bytes(blob[8:10], "little")
    if version != FORMAT_VERSION:
        raise BundleVersionError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    recorded = blob[10:42].hex()
    header_len = int.from_bytes(blob[42:46], "little")
    body = blob[46:]
    if len(body) < header_len:
        raise BundleError(f"{path}: truncated header")
    actual = hashlib.sha256(body).hexdigest()
    if actual != recorded:
        raise BundleDigestError(f"{path}: content digest {actual[:12]}... does "
                                f"not match recorded {recorded[:12]}...")

    header = json.loads(body[:header_len].decode("utf-8"))
    arrays: dict[str, np.ndarray] = {}
    offset = header_len
    for entry in header["arrays"]:
        dtype = entry["dtype"]
        if dtype not in _ALLOWED_DTYPES:
            raise BundleError(f"{path}: unsupported array dtype {dtype!r}")
        shape = tuple(entry["shape"])
        n_bytes = int(np.prod(shape, dtype=np.int64)) * np.dtype(dtype).itemsize
        chunk = body[offset:offset + n_bytes]
        if len(chunk) != n_bytes:
            raise BundleError(f"{path}: truncated payload for {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += n_bytes
    if offset != len(body):
        raise BundleError(f"{path}: {len(body) - offset} trailing bytes")
    return ModelBundle(meta=header["meta"], arrays=arrays,
                       version=version, digest=recorded)
