"""Packed bit sequences, spin/bit conversion and bit-exact file I/O.

Bits are packed most-significant-bit first inside each byte and the tail
of the last byte is always zero.  A ``.bits`` file is just that byte
buffer; the exact bit length lives in a JSON sidecar (``.bits.meta``)
because a byte stream cannot express lengths that are not a multiple of 8.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "AnnealSample",
    "BitSequence",
    "BitWriter",
    "CorruptStreamError",
    "ExplicitLengthRequiredError",
    "MalformedSampleError",
    "SpinParseError",
    "StreamMetadata",
    "atomic_write_bytes",
    "concat",
    "ingest_spin_csv",
    "meta_path_for",
    "read_packed",
    "read_metadata",
    "spins_to_bits",
    "write_packed",
]


class MalformedSampleError(ValueError):
    """A spin vector contains something other than +1/-1."""


class CorruptStreamError(ValueError):
    """A packed file disagrees with its declared bit count."""


class ExplicitLengthRequiredError(FileNotFoundError):
    """No sidecar metadata exists and no bit count was supplied."""


class SpinParseError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


_TAIL_MASK = np.array([0xFF, 0x80, 0xC0, 0xE0, 0xF0, 0xF8, 0xFC, 0xFE], dtype=np.uint8)


class BitSequence:
    """Immutable packed bit container.

    Parameters
    ----------
    payload : bytes-like or 1d uint8 ndarray
        Packed bits, MSB first.  Only the first ``ceil(bit_len / 8)`` bytes
        are kept; pad bits beyond ``bit_len`` are cleared.
    bit_len : int, optional
        Number of valid bits.  Defaults to ``8 * len(payload)``.
    """

    __slots__ = ("_buf", "_n")

    def __init__(self, payload, bit_len: int | None = None, *, _owned: bool = False):
        if isinstance(payload, np.ndarray):
            buf = payload.astype(np.uint8, copy=False).reshape(-1)
        else:
            buf = np.frombuffer(bytes(payload), dtype=np.uint8)
        if bit_len is None:
            bit_len = 8 * buf.size
        if bit_len < 0 or bit_len > 8 * buf.size:
            raise ValueError(f"bit_len={bit_len} does not fit in {buf.size} bytes")
        nbytes = (bit_len + 7) // 8
        buf = buf[:nbytes]
        rem = bit_len % 8
        if rem and buf[-1] & ~_TAIL_MASK[rem]:
            buf = buf.copy()
            buf[-1] &= _TAIL_MASK[rem]
        if buf.flags.writeable:
            if not _owned:
                buf = buf.copy()
            buf.flags.writeable = False
        self._buf = buf
        self._n = int(bit_len)

    @classmethod
    def _take(cls, buf: np.ndarray, bit_len: int) -> "BitSequence":
        """Adopt a freshly allocated buffer without copying it."""
        return cls(buf, bit_len, _owned=True)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_bits(cls, bits) -> "BitSequence":
        """Build from a ``"0101"`` string or an iterable/array of 0/1 values."""
        if isinstance(bits, str):
            if bits.strip("01"):
                raise ValueError("bit strings may only contain '0' and '1'")
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(bits)
            if arr.dtype != np.bool_ and arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError("bit arrays may only contain 0 and 1")
            arr = arr.astype(np.uint8, copy=False).reshape(-1)
        return cls._take(np.packbits(arr), arr.size)

    @classmethod
    def empty(cls) -> "BitSequence":
        return cls(np.zeros(0, dtype=np.uint8), 0)

    # -- accessors ----------------------------------------------------------

    @property
    def payload(self) -> np.ndarray:
        """Read-only packed byte view."""
        return self._buf

    @property
    def bit_len(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitSequence):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._buf, other._buf)

    def __hash__(self) -> int:
        return hash((self._n, self._buf.tobytes()))

    def __repr__(self) -> str:
        if self._n <= 64:
            return f"BitSequence('{self.to_str()}')"
        return f"BitSequence(<{self._n} bits>)"

    def __getitem__(self, i):
        if isinstance(i, slice):
            start, stop, step = i.indices(self._n)
            if step != 1:
                return BitSequence.from_bits(self.unpack()[i])
            return self.slice(start, stop)
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return int((self._buf[i >> 3] >> (7 - (i & 7))) & 1)

    def popcount(self) -> int:
        total = 0
        for lo in range(0, self._buf.size, 1 << 24):
            total += int(np.bitwise_count(self._buf[lo:lo + (1 << 24)]).sum(dtype=np.int64))
        return total

    def unpack(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Bits ``[start, stop)`` as a uint8 array of 0/1."""
        stop = self._n if stop is None else min(stop, self._n)
        if start >= stop:
            return np.zeros(0, dtype=np.uint8)
        lo = start >> 3
        hi = (stop + 7) >> 3
        bits = np.unpackbits(self._buf[lo:hi])
        off = start - 8 * lo
        return bits[off:off + (stop - start)]

    def slice(self, start: int, stop: int) -> "BitSequence":
        stop = min(stop, self._n)
        if start >= stop:
            return BitSequence.empty()
        if start % 8 == 0:
            return BitSequence(self._buf[start >> 3:(stop + 7) >> 3], stop - start)
        return BitSequence.from_bits(self.unpack(start, stop))

    def prefix(self, n: int) -> "BitSequence":
        return self.slice(0, n)

    def reversed(self) -> "BitSequence":
        return BitSequence.from_bits(self.unpack()[::-1])

    def to_str(self) -> str:
        return (self.unpack() + ord("0")).tobytes().decode("ascii")

    def to_bytes(self) -> bytes:
        return self._buf.tobytes()


class BitWriter:
    """Append unpacked bit chunks, emitting MSB-first packed bytes.

    With ``sink=None`` the bytes are kept in memory and :meth:`finish`
    returns a :class:`BitSequence`; otherwise they are written to the open
    binary file ``sink`` as soon as whole bytes are available.
    """

    def __init__(self, sink: BinaryIO | None = None):
        self._sink = sink
        self._chunks: list[np.ndarray] = []
        self._carry = np.zeros(0, dtype=np.uint8)
        self.bit_count = 0

    def write_bits(self, bits: np.ndarray) -> None:
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
        if bits.size == 0:
            return
        self.bit_count += bits.size
        if self._carry.size:
            bits = np.concatenate([self._carry, bits])
        whole = bits.size - bits.size % 8
        self._carry = bits[whole:].copy()
        if whole:
            self._emit(np.packbits(bits[:whole]))

    def write_packed(self, payload: np.ndarray, bit_len: int) -> None:
        """Append an already packed buffer (fast path when byte aligned)."""
        if self._carry.size == 0 and bit_len % 8 == 0:
            self.bit_count += bit_len
            self._emit(np.asarray(payload[: bit_len // 8], dtype=np.uint8))
        else:
            self.write_bits(np.unpackbits(np.asarray(payload, dtype=np.uint8))[:bit_len])

    def _emit(self, packed: np.ndarray) -> None:
        if self._sink is None:
            self._chunks.append(packed.copy())
        else:
            self._sink.write(packed.tobytes())

    def finish(self) -> BitSequence | None:
        if self._carry.size:
            self._emit(np.packbits(self._carry))
            self._carry = np.zeros(0, dtype=np.uint8)
        if self._sink is not None:
            return None
        if not self._chunks:
            return BitSequence.empty()
        buf = np.concatenate(self._chunks) if len(self._chunks) > 1 else self._chunks[0]
        self._chunks = []
        return BitSequence._take(buf, self.bit_count)


def concat(parts: Iterable[BitSequence]) -> BitSequence:
    """Concatenate bit sequences in order."""
    writer = BitWriter()
    for part in parts:
        writer.write_packed(part.payload, part.bit_len)
    return writer.finish()


# -- anneal samples -------------------------------------------------------


@dataclass(frozen=True)
class AnnealSample:
    """One anneal-readout cycle: spins in ascending logical qubit order."""

    spins: np.ndarray
    anneal_index: int
    epoch_tag: str | None = None

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int8).reshape(-1)
        spins.flags.writeable = False
        object.__setattr__(self, "spins", spins)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnnealSample):
            return NotImplemented
        return (
            self.anneal_index == other.anneal_index
            and self.epoch_tag == other.epoch_tag
            and np.array_equal(self.spins, other.spins)
        )


def spins_to_bits(sample: AnnealSample | Sequence[int] | np.ndarray) -> BitSequence:
    """Map spins to bits, +1 -> 1 and -1 -> 0, preserving qubit order."""
    spins = sample.spins if isinstance(sample, AnnealSample) else np.asarray(sample)
    spins = np.asarray(spins).reshape(-1)
    bad = (spins != 1) & (spins != -1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise MalformedSampleError(f"spin {spins[i]!r} at position {i} is not +1 or -1")
    return BitSequence.from_bits(spins == 1)


# -- files ----------------------------------------------------------------


@dataclass
class StreamMetadata:
    bit_count: int
    source_descriptor: str = ""
    created_at: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    )
    config_digest: str = ""
    epoch_tags: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "StreamMetadata":
        data = json.loads(text)
        known = {k: data[k] for k in ("bit_count", "source_descriptor", "created_at",
                                       "config_digest", "epoch_tags") if k in data}
        if "bit_count" not in known:
            raise CorruptStreamError("metadata lacks bit_count")
        return cls(**known)


def meta_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_packed(seq: BitSequence, path, source_descriptor: str = "",
                 config_digest: str = "", epoch_tags: list | None = None) -> StreamMetadata:
    """Write ``seq`` to ``path`` plus the ``.meta`` sidecar; returns the metadata."""
    meta = StreamMetadata(
        bit_count=seq.bit_len,
        source_descriptor=source_descriptor,
        config_digest=config_digest,
        epoch_tags=list(epoch_tags or []),
    )
    atomic_write_bytes(path, seq.to_bytes())
    atomic_write_bytes(meta_path_for(path), meta.to_json().encode())
    return meta


def read_metadata(path) -> StreamMetadata:
    mp = meta_path_for(path)
    if not mp.exists():
        raise ExplicitLengthRequiredError(
            f"{mp} not found; pass an explicit bit count to read {path}"
        )
    return StreamMetadata.from_json(mp.read_text())


def read_packed(path, meta: StreamMetadata | int | None = None) -> BitSequence:
    """Read a ``.bits`` file.

    ``meta`` may be a :class:`StreamMetadata`, an explicit bit count, or
    ``None`` to load the sidecar next to ``path``.
    """
    if meta is None:
        meta = read_metadata(path)
    bit_count = meta if isinstance(meta, int) else meta.bit_count
    size = os.path.getsize(path)
    if size != (bit_count + 7) // 8:
        raise CorruptStreamError(
            f"{path}: {size} bytes on disk but bit_count={bit_count} needs {(bit_count + 7) // 8}"
        )
    buf = np.fromfile(path, dtype=np.uint8)
    rem = bit_count % 8
    if rem and buf[-1] & ~_TAIL_MASK[rem]:
        raise CorruptStreamError(f"{path}: nonzero pad bits after bit {bit_count}")
    return BitSequence._take(buf, bit_count)


# -- spin CSV ingestion ---------------------------------------------------

_SPIN_CELLS = {"+1": 1, "1": 1, "-1": -1}


def _parse_header(header: list[str]) -> list[int]:
    if not header or header[0].strip() != "anneal_index":
        raise SpinParseError("header must start with 'anneal_index'", row=0, column=0)
    ids = []
    for col, name in enumerate(header[1:], start=1):
        name = name.strip()
        if not (name.startswith("q") and name[1:].isdigit()):
            raise SpinParseError(f"bad qubit column name {name!r}", row=0, column=col)
        ids.append(int(name[1:]))
    if any(b <= a for a, b in zip(ids, ids[1:])):
        raise SpinParseError("qubit ids must be strictly ascending", row=0)
    if not ids:
        raise SpinParseError("no qubit columns", row=0)
    return ids


def ingest_spin_csv(path) -> Iterator[AnnealSample]:
    """Stream anneal samples from a spin CSV, one row at a time.

    Row numbers in errors are 1-based file lines (the header is row 0)
    and columns are 0-based field positions.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpinParseError("empty file", row=0) from None
        ids = _parse_header(header)
        width = len(ids) + 1
        for ordinal, row in enumerate(reader):
            if not row:
                continue
            line = ordinal + 1
            if len(row) != width:
                raise SpinParseError(f"expected {width} fields, got {len(row)}", row=line)
            spins = np.empty(len(ids), dtype=np.int8)
            for col in range(1, width):
                cell = row[col].strip()
                try:
                    spins[col - 1] = _SPIN_CELLS[cell]
                except KeyError:
                    raise SpinParseError(f"cell {cell!r} is not a spin", row=line, column=col) from None
            yield AnnealSample(spins, anneal_index=ordinal)


def spin_csv_to_packed(csv_path, out_path, source_descriptor: str = "") -> StreamMetadata:
    """Convert a spin CSV to a ``.bits`` file without holding all rows in memory."""
    out_path = Path(out_path)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, prefix="." + out_path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            writer = BitWriter(fh)
            for sample in ingest_spin_csv(csv_path):
                writer.write_bits(sample.spins == 1)
            writer.finish()
        meta = StreamMetadata(bit_count=writer.bit_count,
                              source_descriptor=source_descriptor or f"spin csv {csv_path}")
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    atomic_write_bytes(meta_path_for(out_path), meta.to_json().encode())
    return meta
