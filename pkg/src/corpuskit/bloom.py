"""Bloom filter with tracked insert count and theoretical false-positive rate.

Membership answers are one-sided: an inserted key is always reported present.
The expected false-positive rate after n inserts is (1 - e^(-k*n/m))^k for m
bits and k probes per key, which stays meaningful past the sizing capacity, so
saturation degrades accuracy but never correctness.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from typing import Iterator

log = logging.getLogger(__name__)


class BloomFilter:
    def __init__(self, m_bits: int, hash_count: int, seed: int = 0, capacity: int | None = None):
        if m_bits < 8:
            raise ValueError(f"m_bits must be >= 8, got {m_bits}")
        if hash_count < 1:
            raise ValueError(f"hash_count must be >= 1, got {hash_count}")
        self.m_bits = m_bits
        self.hash_count = hash_count
        self.seed = seed
        self.capacity = capacity
        self.inserted = 0
        self._bits = bytearray((m_bits + 7) // 8)
        self._seed_key = seed.to_bytes(8, "big", signed=True)
        self._saturation_warned = False

    @staticmethod
    def optimal_parameters(capacity: int, target_fpr: float) -> tuple[int, int]:
        """Smallest (m, k) giving ``target_fpr`` at ``capacity`` inserts."""
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if not 0.0 < target_fpr < 1.0:
            raise ValueError(f"target_fpr must be in (0, 1), got {target_fpr}")
        m = math.ceil(-capacity * math.log(target_fpr) / math.log(2) ** 2)
        k = max(1, round(m / capacity * math.log(2)))
        return m, k

    @classmethod
    def with_capacity(cls, capacity: int, target_fpr: float, seed: int = 0) -> "BloomFilter":
        m, k = cls.optimal_parameters(capacity, target_fpr)
        return cls(m, k, seed=seed, capacity=capacity)

    def _probes(self, key: bytes) -> Iterator[int]:
        digest = hashlib.blake2b(key, digest_size=16, key=self._seed_key).digest()
        h1 = int.from_bytes(digest[:8], "big")
        # Forcing h2 odd keeps the probe stride non-degenerate for even m.
        h2 = int.from_bytes(digest[8:], "big") | 1
        for i in range(self.hash_count):
            yield (h1 + i * h2) % self.m_bits

    def _note_insert(self) -> None:
        self.inserted += 1
        if (
            self.capacity is not None
            and self.inserted > self.capacity
            and not self._saturation_warned
        ):
            self._saturation_warned = True
            log.warning(
                "bloom filter over capacity (%d > %d); expected false-positive rate now %.3g",
                self.inserted,
                self.capacity,
                self.expected_fpr(),
            )

    def insert(self, key: bytes) -> None:
        for idx in self._probes(key):
            self._bits[idx >> 3] |= 1 << (idx & 7)
        self._note_insert()

    def contains(self, key: bytes) -> bool:
        return all(self._bits[idx >> 3] >> (idx & 7) & 1 for idx in self._probes(key))

    def add(self, key: bytes) -> bool:
        """Insert ``key`` and report whether it already looked present."""
        present = True
        for idx in self._probes(key):
            byte, bit = idx >> 3, 1 << (idx & 7)
            if not self._bits[byte] & bit:
                present = False
                self._bits[byte] |= bit
        self._note_insert()
        return present

    def expected_fpr(self, inserted: int | None = None) -> float:
        n = self.inserted if inserted is None else inserted
        if n == 0:
            return 0.0
        return (1.0 - math.exp(-self.hash_count * n / self.m_bits)) ** self.hash_count

    def parameters(self) -> dict:
        """Sizing parameters in a manifest-friendly shape."""
        return {
            "m_bits": self.m_bits,
            "hash_count": self.hash_count,
            "seed": self.seed,
            "capacity": self.capacity,
            "inserted": self.inserted,
        }

    def to_bytes(self) -> bytes:
        header = json.dumps(self.parameters(), sort_keys=True).encode("utf-8")
        return len(header).to_bytes(4, "big") + header + bytes(self._bits)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BloomFilter":
        header_len = int.from_bytes(blob[:4], "big")
        params = json.loads(blob[4 : 4 + header_len].decode("utf-8"))
        flt = cls(
            params["m_bits"],
            params["hash_count"],
            seed=params["seed"],
            capacity=params["capacity"],
        )
        bits = blob[4 + header_len :]
        if len(bits) != len(flt._bits):
            raise ValueError("bloom filter payload length does not match m_bits")
        flt._bits = bytearray(bits)
        flt.inserted = params["inserted"]
        return flt
