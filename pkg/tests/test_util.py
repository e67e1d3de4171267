import math

import numpy as np

from mmcascade import config_hash, fmt, mix_seed, parallel_map


class TestMixSeed:
    def test_deterministic(self):
        assert mix_seed(42, 3) == mix_seed(42, 3)

    def test_distinct_streams(self):
        seeds = {mix_seed(42, k) for k in range(10_000)}
        assert len(seeds) == 10_000

    def test_distinct_bases(self):
        assert mix_seed(1, 0) != mix_seed(2, 0)

    def test_stays_in_64_bits(self):
        for base in (0, 1, 2**63, 2**64 - 1):
            for k in (0, 1, 999):
                s = mix_seed(base, k)
                assert 0 <= s < 2**64


class TestFmt:
    def test_round_trips_exactly(self, rng):
        for _ in range(200):
            x = float(rng.normal() * 10.0 ** rng.integers(-12, 12))
            assert float(fmt(x)) == x

    def test_shortest_form(self):
        assert fmt(0.1) == "0.1"
        assert fmt(1.0) == "1.0"
        assert fmt(1 / 3) == "0.3333333333333333"

    def test_special_values(self):
        assert fmt(float("inf")) == "inf"
        assert float(fmt(float("nan"))) != float(fmt(float("nan")))  # nan round-trip
        assert fmt(-0.0) == "-0.0"


class TestConfigHash:
    def test_key_order_invariant(self):
        a = config_hash({"x": 1, "y": [1, 2], "z": "s"})
        b = config_hash({"z": "s", "y": [1, 2], "x": 1})
        assert a == b

    def test_value_sensitive(self):
        assert config_hash({"x": 1}) != config_hash({"x": 2})

    def test_short_hex(self):
        h = config_hash({"x": 1})
        assert len(h) == 12
        int(h, 16)


class TestParallelMap:
    def test_sequential_path(self):
        assert parallel_map(math.sqrt, [1.0, 4.0, 9.0], threads=1) == [1.0, 2.0, 3.0]

    def test_parallel_preserves_order(self):
        items = list(range(20))
        out = parallel_map(math.factorial, items, threads=3)
        assert out == [math.factorial(i) for i in items]

    def test_single_item_shortcut(self):
        assert parallel_map(math.sqrt, [16.0], threads=8) == [4.0]
