import math
import unittest

import numpy as np

from src.coding.cdf_tables import TOTAL_FREQUENCY, CdfTable, build_cdf_tables, quantize_pmf, scale_table
from src.coding.range_coder import range_decode, range_encode
from src.models.errors import BitstreamError


def _table(pmf: np.ndarray, offset: int) -> CdfTable:
    freqs = quantize_pmf(pmf)
    return CdfTable(cdf=tuple(int(c) for c in np.concatenate(([0], np.cumsum(freqs)))), offset=offset)


class TestRangeCoder(unittest.TestCase):
    """Test cases for the range coder."""

    def setUp(self):
        """Build twenty random table distributions."""
        self.rng = np.random.default_rng(0)
        self.tables = []
        for _ in range(20):
            size = int(self.rng.integers(2, 300))
            pmf = self.rng.dirichlet(np.full(size, 0.5)) * 0.999
            self.tables.append(_table(pmf, offset=-int(self.rng.integers(0, size))))

    def test_empty_sequence(self):
        """An empty sequence flushes to at most 8 bytes and decodes to nothing."""
        data = range_encode([], [], self.tables)
        self.assertLessEqual(len(data), 8)
        self.assertEqual(range_decode(data, [], self.tables), [])

    def _sample(self, count: int):
        ids = self.rng.integers(0, len(self.tables), size=count)
        symbols, shannon = [], 0.0
        for table_id in ids:
            table = self.tables[table_id]
            freqs = table.frequencies[:-1]
            index = int(self.rng.choice(len(freqs), p=freqs / freqs.sum()))
            symbols.append(index + table.offset)
            shannon -= math.log2(freqs[index] / TOTAL_FREQUENCY)
        return symbols, ids.tolist(), shannon

    def test_round_trip_and_length(self):
        """10^5 symbols round trip exactly within 1% + 32 bytes of the Shannon length."""
        symbols, ids, shannon = self._sample(100_000)
        data = range_encode(symbols, ids, self.tables)
        self.assertEqual(range_decode(data, ids, self.tables), symbols)
        self.assertLessEqual(len(data), 1.01 * shannon / 8 + 32)

    def test_escape_values(self):
        """Values outside a table's range survive through the escape payload."""
        table = _table(np.array([0.2, 0.5, 0.2]), offset=-1)
        symbols = [0, 1, -1, 5000, -70000, 2**31 - 1, -(2**31), 2]
        data = range_encode(symbols, [0] * len(symbols), [table])
        self.assertEqual(range_decode(data, [0] * len(symbols), [table]), symbols)

    def test_gaussian_tables_round_trip(self):
        """Latent-like symbols round trip through the shared Gaussian tables."""
        scales = scale_table()
        tables = build_cdf_tables(scales, 255)
        ids = self.rng.integers(0, len(tables), size=5000)
        symbols = [int(round(self.rng.normal(0, scales[i]))) for i in ids]
        data = range_encode(symbols, ids.tolist(), tables)
        self.assertEqual(range_decode(data, ids.tolist(), tables), symbols)

    def test_truncated_stream(self):
        """Decoding past the end of the data raises BitstreamError."""
        symbols, ids, _ = self._sample(2000)
        data = range_encode(symbols, ids, self.tables)
        with self.assertRaises(BitstreamError):
            range_decode(data[: len(data) // 2], ids, self.tables)

    def test_mismatched_lengths(self):
        """Symbol and table-index counts must agree."""
        with self.assertRaises(ValueError):
            range_encode([1, 2], [0], self.tables)
