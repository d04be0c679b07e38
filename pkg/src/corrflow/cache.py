"""On-disk spectrum cache.

File layout (all little-endian)::

    magic      8s   b"CFSPECTR"
    version    u4   1
    length     u4   chain length L
    dim        u8   2**L
    flags      u4   bit 0: complex eigenvectors
    reserved   u4   0
    spec_hash  32s  sha256 of the canonical SpinChainSpec JSON
    data_hash  32s  sha256 of the payload that follows
    payload         energies (dim f8) then eigenvectors row-major
                    (dim*dim f8, or c16 when bit 0 is set)

Only beta-independent data is stored.  Files are named ``<spec_hash>.spec``.
"""
from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .spectral import Spectrum, diagonalize
from .spinchain import SpinChainSpec, build_hamiltonian

MAGIC = b"CFSPECTR"
VERSION = 1
_HEADER = struct.Struct("<8sIIQII32s32s")
ENV_VAR = "CORRFLOW_CACHE_DIR"


class CacheError(RuntimeError):
    pass


def cache_dir() -> Path:
    root = os.environ.get(ENV_VAR)
    return Path(root) if root else Path.home() / ".cache" / "corrflow"


def cache_path(spec: SpinChainSpec, root: Path | None = None) -> Path:
    return (root or cache_dir()) / f"{spec.content_hash()}.spec"


def save_spectrum(path: Path, s: Spectrum, spec: SpinChainSpec) -> None:
    is_complex = np.iscomplexobj(s.vectors)
    vec_dtype = "<c16" if is_complex else "<f8"
    payload = (
        np.ascontiguousarray(s.energies, dtype="<f8").tobytes()
        + np.ascontiguousarray(s.vectors, dtype=vec_dtype).tobytes()
    )
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        spec.length,
        s.dim,
        int(is_complex),
        0,
        bytes.fromhex(spec.content_hash()),
        hashlib.sha256(payload).digest(),
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def read_header(path: Path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise CacheError(f"{path}: truncated header")
    magic, version, length, dim, flags, _, spec_hash, data_hash = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CacheError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheError(f"{path}: unsupported version {version}")
    return {
        "length": length,
        "dim": dim,
        "complex": bool(flags & 1),
        "spec_hash": spec_hash.hex(),
        "data_hash": data_hash.hex(),
        "size": Path(path).stat().st_size,
    }


def load_spectrum(path: Path, spec: SpinChainSpec | None = None) -> Spectrum:
    hdr = read_header(path)
    if spec is not None and hdr["spec_hash"] != spec.content_hash():
        raise CacheError(f"{path}: spec hash mismatch")
    dim = hdr["dim"]
    vec_dtype = np.dtype("<c16") if hdr["complex"] else np.dtype("<f8")
    expected = 8 * dim + vec_dtype.itemsize * dim * dim
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        payload = fh.read()
    if len(payload) != expected:
        raise CacheError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).hexdigest() != hdr["data_hash"]:
        raise CacheError(f"{path}: payload hash mismatch (corrupted cache file)")
    energies = np.frombuffer(payload, dtype="<f8", count=dim).astype(float)
    vectors = np.frombuffer(payload, dtype=vec_dtype, offset=8 * dim).reshape(dim, dim)
    return Spectrum(energies, vectors.astype(vectors.dtype.newbyteorder("=")))


def cached_spectrum(spec: SpinChainSpec, root: Path | None = None, use_cache: bool = True) -> Spectrum:
    """Diagonalize ``spec``'s Hamiltonian, reusing a cached spectrum if one exists."""
    if not use_cache:
        return diagonalize(build_hamiltonian(spec))
    path = cache_path(spec, root)
    if path.exists():
        return load_spectrum(path, spec)
    s = diagonalize(build_hamiltonian(spec))
    save_spectrum(path, s, spec)
    return s


def list_cache(root: Path | None = None) -> list[tuple[Path, dict]]:
    root = root or cache_dir()
    if not root.exists():
        return []
    out = []
    for p in sorted(root.glob("*.spec")):
        try:
            out.append((p, read_header(p)))
        except CacheError as exc:
            out.append((p, {"error": str(exc)}))
    return out


def remove_cache(root: Path | None = None, prefix: str | None = None) -> list[Path]:
    removed = []
    for p, _ in list_cache(root):
        if prefix is None or p.stem.startswith(prefix):
            p.unlink()
            removed.append(p)
    return removed
