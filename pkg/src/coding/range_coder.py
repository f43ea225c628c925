"""Carry-less 32-bit range coder over 16-bit frequency tables.

Symbols outside a table's explicit range are coded as the table's escape bin followed by the raw value
as two uniform 16-bit codes (32-bit two's complement).
"""

from bisect import bisect_right
from typing import List, Sequence

from src.coding.cdf_tables import PROBABILITY_BITS, TOTAL_FREQUENCY, CdfTable
from src.models.errors import BitstreamError

PRECISION = 32
MASK = (1 << PRECISION) - 1
TOP = 1 << (PRECISION - 8)
BOTTOM = 1 << (PRECISION - 16)
ESCAPE_BITS = 32


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK
        self.output = bytearray()

    def encode(self, start: int, frequency: int):
        """Narrow the interval to [start, start + frequency) out of TOTAL_FREQUENCY."""
        r = self.range >> PROBABILITY_BITS
        self.low += start * r
        self.range = r * frequency
        self._normalize()

    def _normalize(self):
        while (self.low ^ (self.low + self.range)) < TOP or self.range < BOTTOM:
            if (self.low ^ (self.low + self.range)) >= TOP:
                # Range straddles a top-byte boundary while too small: drop the part above it.
                self.range = (MASK + 1 - self.low) & (BOTTOM - 1)
            self.output.append(self.low >> (PRECISION - 8))
            self.low = (self.low << 8) & MASK
            self.range = (self.range << 8) & MASK

    def encode_symbol(self, value: int, table: CdfTable):
        index = table.index_of(value)
        self.encode(table.cdf[index], table.cdf[index + 1] - table.cdf[index])
        if index == table.escape_index:
            raw = value & ((1 << ESCAPE_BITS) - 1)
            for shift in range(ESCAPE_BITS - PROBABILITY_BITS, -1, -PROBABILITY_BITS):
                self.encode((raw >> shift) & (TOTAL_FREQUENCY - 1), 1)

    def finish(self) -> bytes:
        for _ in range(PRECISION // 8):
            self.output.append(self.low >> (PRECISION - 8))
            self.low = (self.low << 8) & MASK
        return bytes(self.output)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.position = 0
        self.low = 0
        self.range = MASK
        self.state = 0
        for _ in range(PRECISION // 8):
            self.state = (self.state << 8) | self._next_byte()

    def _next_byte(self) -> int:
        if self.position >= len(self.data):
            raise BitstreamError(f"range decoder ran past the end of a {len(self.data)}-byte segment")
        byte = self.data[self.position]
        self.position += 1
        return byte

    def _count(self) -> int:
        return (self.state - self.low) // (self.range >> PROBABILITY_BITS)

    def _consume(self, start: int, frequency: int):
        r = self.range >> PROBABILITY_BITS
        self.low += start * r
        self.range = r * frequency
        while (self.low ^ (self.low + self.range)) < TOP or self.range < BOTTOM:
            if (self.low ^ (self.low + self.range)) >= TOP:
                self.range = (MASK + 1 - self.low) & (BOTTOM - 1)
            self.state = ((self.state << 8) | self._next_byte()) & MASK
            self.low = (self.low << 8) & MASK
            self.range = (self.range << 8) & MASK

    def decode_symbol(self, table: CdfTable) -> int:
        count = self._count()
        index = bisect_right(table.cdf, count) - 1
        if not 0 <= index <= table.escape_index:
            raise BitstreamError(f"decoded count {count} falls outside the frequency table")
        self._consume(table.cdf[index], table.cdf[index + 1] - table.cdf[index])
        if index != table.escape_index:
            return index + table.offset

        raw = 0
        for _ in range(ESCAPE_BITS // PROBABILITY_BITS):
            chunk = self._count()
            if chunk >= TOTAL_FREQUENCY:
                raise BitstreamError("corrupt escape payload")
            self._consume(chunk, 1)
            raw = (raw << PROBABILITY_BITS) | chunk
        return raw - (1 << ESCAPE_BITS) if raw >> (ESCAPE_BITS - 1) else raw


def range_encode(symbols: Sequence[int], cdf_ids: Sequence[int], tables: Sequence[CdfTable]) -> bytes:
    """Code each symbol with tables[cdf_ids[i]].

    Args:
        symbols: Integer values; those outside a table's support go through its escape bin.
        cdf_ids: Table index per symbol.
        tables: Shared CDF tables.

    Returns:
        The flushed byte string.

    Raises:
        ValueError: if symbols and cdf_ids differ in length.
    """
    if len(symbols) != len(cdf_ids):
        raise ValueError(f"{len(symbols)} symbols but {len(cdf_ids)} table indexes")
    encoder = RangeEncoder()
    for value, table_id in zip(symbols, cdf_ids):
        encoder.encode_symbol(int(value), tables[table_id])
    return encoder.finish()


def range_decode(data: bytes, cdf_ids: Sequence[int], tables: Sequence[CdfTable]) -> List[int]:
    """Inverse of range_encode; the number of symbols is len(cdf_ids)."""
    decoder = RangeDecoder(data)
    return [decoder.decode_symbol(tables[table_id]) for table_id in cdf_ids]
