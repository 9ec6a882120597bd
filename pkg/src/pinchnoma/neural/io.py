"""Binary model file.

Layout (little-endian): ``b"PCNN"``, u16 version, u16 trained_K, then for
each array (layer parameters in fixed order, then norm mean, norm std and
the dropout rate) a u32 ndim, u32 dims and float64 data; a CRC-32 of all
preceding bytes closes the file.
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import CorruptArtifact
from .cnn import FORMAT_VERSION, PARAM_ORDER, CnnModel, param_shapes

MAGIC = b"PCNN"


def _pack_array(a: np.ndarray) -> bytes:
    a = np.asarray(a, dtype="<f8")
    head = struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes(order="C")


def model_bytes(model: CnnModel) -> bytes:
    body = MAGIC + struct.pack("<HH", model.version, model.trained_K)
    for name in PARAM_ORDER:
        body += _pack_array(model.params[name])
    body += _pack_array(model.norm_mean) + _pack_array(model.norm_std)
    body += _pack_array(np.array([model.dropout_rate]))
    return body + struct.pack("<I", zlib.crc32(body))


def save_model(path, model: CnnModel) -> None:
    with open(path, "wb") as fh:
        fh.write(model_bytes(model))


def _read_array(buf: bytes, pos: int) -> tuple[np.ndarray, int]:
    try:
        (ndim,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if ndim > 8:
            raise CorruptArtifact(f"implausible ndim {ndim}")
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        end = pos + 8 * count
        if end > len(buf):
            raise CorruptArtifact("truncated array data")
        a = np.frombuffer(buf[pos:end], dtype="<f8").astype(float).reshape(shape)
    except struct.error as exc:
        raise CorruptArtifact(f"truncated model file: {exc}") from exc
    return a, end


def model_from_bytes(buf: bytes) -> CnnModel:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise CorruptArtifact("bad magic")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptArtifact("CRC-32 mismatch")
    version, K = struct.unpack_from("<HH", body, 4)
    if version != FORMAT_VERSION:
        raise CorruptArtifact(f"unsupported format version {version}")
    pos = 8
    params = {}
    shapes = param_shapes(K)
    for name in PARAM_ORDER:
        params[name], pos = _read_array(body, pos)
        if params[name].shape != shapes[name]:
            raise CorruptArtifact(f"{name}: shape {params[name].shape} != {shapes[name]}")
    mean, pos = _read_array(body, pos)
    std, pos = _read_array(body, pos)
    drop, pos = _read_array(body, pos)
    if pos != len(body):
        raise CorruptArtifact("trailing bytes before checksum")
    return CnnModel(params, K, mean, std, float(drop[0]), version)


def load_model(path) -> CnnModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
