"""
MEFW checkpoint files: a flat container of named parameter arrays.

Layout (little-endian)::

    b'MEFW' | version u16 | record count u32
    per record: name length u16 | name (UTF-8) | ndim u32 | extents u32 * ndim | values f64 * prod(extents)

"""
import os
import struct

import numpy as np

from ..errors import FormatError

MAGIC = b'MEFW'
VERSION = 1
_HEADER = struct.Struct('<4sHI')


def write_checkpoint(params, file_path):
    """Write a name to array dictionary. Records are stored in dictionary order."""
    chunks = [_HEADER.pack(MAGIC, VERSION, len(params))]
    for name, value in params.items():
        encoded = name.encode('utf-8')
        value = np.asarray(value)
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<I', value.ndim))
        chunks.append(np.asarray(value.shape, dtype='<u4').tobytes())
        chunks.append(np.ascontiguousarray(value, dtype='<f8').tobytes())

    folder = os.path.dirname(file_path)
    if folder and not os.path.exists(folder):
        os.makedirs(folder)
    with open(file_path, 'wb') as fh:
        fh.write(b''.join(chunks))


def read_checkpoint(file_path):
    """Read a checkpoint written by ``write_checkpoint()`` into a name to float64 array dictionary."""
    with open(file_path, 'rb') as fh:
        data = fh.read()
    return parse_checkpoint(data)


def parse_checkpoint(data):
    if len(data) < _HEADER.size:
        raise FormatError('Truncated MEFW header', len(data))
    magic, version, n_records = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError('Bad magic ' + repr(magic) + ', expected ' + repr(MAGIC), 0)
    if version != VERSION:
        raise FormatError('Unsupported MEFW version ' + str(version), 4)

    params = {}
    offset = _HEADER.size
    for _ in range(n_records):
        offset, name_length = _take(data, offset, '<H')
        if offset + name_length > len(data):
            raise FormatError('Truncated record name', len(data))
        try:
            name = data[offset:offset + name_length].decode('utf-8')
        except UnicodeDecodeError:
            raise FormatError('Record name is not valid UTF-8', offset)
        offset += name_length
        offset, ndim = _take(data, offset, '<I')
        if offset + 4 * ndim > len(data):
            raise FormatError('Truncated extents of record ' + repr(name), len(data))
        shape = struct.unpack_from('<' + 'I' * ndim, data, offset)
        offset += 4 * ndim
        n_bytes = 8 * int(np.prod(shape, dtype=object))
        if offset + n_bytes > len(data):
            raise FormatError('Truncated values of record ' + repr(name), len(data))
        values = np.frombuffer(data[offset:offset + n_bytes], dtype='<f8')
        params[name] = values.astype(np.float64).reshape(shape)
        offset += n_bytes
    if offset != len(data):
        raise FormatError('Unexpected trailing bytes', offset)
    return params


def _take(data, offset, fmt):
    size = struct.calcsize(fmt)
    if offset + size > len(data):
        raise FormatError('Unexpected end of file', len(data))
    return offset + size, struct.unpack_from(fmt, data, offset)[0]
