"""
Harmonic solver - diagnostic matrix dumps

Layout: 8-byte magic b'RBNMAT01', uint32 rows, uint32 cols (little endian),
then rows * cols float64 values in row-major order.
"""

import logging
from pathlib import Path

import numpy as np

from .exceptions import SolverError

logger = logging.getLogger(__name__)

MAGIC = b'RBNMAT01'
HEADER_SIZE = 16


def write_matrix(path, matrix):
    matrix = np.ascontiguousarray(matrix, dtype='<f8')
    if matrix.ndim != 2:
        raise SolverError(f'Only 2-D matrices can be dumped, got shape {matrix.shape}')
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('wb') as handle:
            handle.write(MAGIC)
            handle.write(np.array(matrix.shape, dtype='<u4').tobytes())
            handle.write(matrix.tobytes(order='C'))
    except OSError as exc:
        raise SolverError(f'Could not write matrix dump {path}: {exc}') from exc
    return path


def read_matrix(path):
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE or data[:8] != MAGIC:
        raise SolverError(f'{path} is not a matrix dump')
    rows, cols = np.frombuffer(data[8:HEADER_SIZE], dtype='<u4')
    body = np.frombuffer(data[HEADER_SIZE:], dtype='<f8')
    if body.size != int(rows) * int(cols):
        raise SolverError(f'{path} holds {body.size} values, header says {rows}x{cols}')
    return body.reshape(int(rows), int(cols)).copy()
