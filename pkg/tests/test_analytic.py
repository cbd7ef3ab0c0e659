import math
from fractions import Fraction

import pytest

from gathernoc.analytic import (
    AnalyticParams,
    estimated_table,
    gather_collection_cycles,
    improvement,
    improvement_pct,
    latency_gather,
    latency_ru,
    ru_collection_cycles,
)
from gathernoc.config import MeshConfig
from gathernoc.workload import model_layers

# AlexNet convolution shapes and the expected ideal improvements at 8x8.
GOLDEN_8X8 = {
    "conv1": 2.92,
    "conv2": 0.73,
    "conv3": 0.68,
    "conv4": 0.34,
    "conv5": 0.51,
}


def _params(**kw):
    base = dict(rows=8, cols=8, in_channels=3, kernel_side=11,
                input_vectors=8, kernels=8)
    base.update(kw)
    return AnalyticParams(**base)


class TestCollectionTerms:
    def test_ru_bracket_conv1_shape(self):
        p = _params()
        assert ru_collection_cycles(p) == 8 * (5 + 2) - 1 == 55

    def test_gather_bracket_single_packet(self):
        p = _params()
        assert gather_collection_cycles(p) == 8 * 5 + 4 - 1 == 43

    def test_ru_latency_conv1_single_round(self):
        p = _params()
        assert latency_ru(p) == 363 + 5 + 55 == 423

    def test_collection_degenerates_on_single_column(self):
        # one column, no pipeline, single-flit packets: only streaming + MAC
        p = _params(cols=1, pipeline_depth=0, unicast_flits=1, kernels=1)
        assert latency_ru(p) == p.stream_cycles + p.mac_latency

    def test_doubling_rounds_doubles_latency(self):
        one = _params(input_vectors=8, kernels=8)
        two = _params(input_vectors=16, kernels=8)
        assert latency_ru(two) == 2 * latency_ru(one)
        assert latency_gather(two) == 2 * latency_gather(one)

    def test_gather_chunks_serialize_when_capacity_one(self):
        p = _params(payloads_per_gather=1)
        expected = sum((8 - i) * 5 + 4 - 1 for i in range(8))
        assert gather_collection_cycles(p) == expected

    def test_timeout_wait_is_additive_per_chunk(self):
        base = _params(payloads_per_gather=4)
        waited = _params(payloads_per_gather=4, timeout_wait=5)
        chunks = math.ceil(8 / 4)
        assert gather_collection_cycles(waited) - gather_collection_cycles(base) == 5 * chunks


class TestImprovement:
    def test_golden_alexnet_8x8(self):
        cfg = MeshConfig()
        table = estimated_table(cfg, model_layers("alexnet"))
        assert table == GOLDEN_8X8

    def test_golden_values_are_two_decimal_half_up(self):
        # conv1: 12/411 = 2.9197..% rounds up to 2.92
        p = _params()
        assert improvement(p) == Fraction(12, 411)
        assert improvement_pct(p) == 2.92

    def test_identical_schemes_no_improvement(self):
        p = _params(cols=1, kernels=1, unicast_flits=4, gather_flits=4,
                    payloads_per_gather=1)
        assert improvement(p) == 0

    def test_monotone_decreasing_in_stream_length(self):
        cfg = MeshConfig()
        layers = sorted(model_layers("alexnet"),
                        key=lambda l: l.in_channels * l.kernel_side ** 2)
        imps = [improvement(AnalyticParams.for_run(cfg, l)) for l in layers]
        assert imps == sorted(imps, reverse=True)
        assert imps[0] > imps[-1]

    def test_larger_mesh_improves_every_layer(self):
        small = MeshConfig(rows=8, cols=8)
        large = MeshConfig(rows=16, cols=16)
        for model in ("alexnet", "vgg16"):
            for layer in model_layers(model):
                a = improvement(AnalyticParams.for_run(small, layer))
                b = improvement(AnalyticParams.for_run(large, layer))
                assert b > a, layer.layer

    def test_gather_never_slower_over_experiment_grid(self):
        for rows in (4, 8, 16):
            for layer_model in ("alexnet", "vgg16"):
                for layer in model_layers(layer_model):
                    cfg = MeshConfig(rows=rows, cols=rows)
                    p = AnalyticParams.for_run(cfg, layer)
                    assert latency_gather(p) <= latency_ru(p)


class TestRoundFactor:
    def test_ceiling_round_factor(self):
        p = _params(input_vectors=10, kernels=10)
        assert p.rounds == math.ceil(10 / 8) * math.ceil(10 / 8) == 4

    def test_rounds_cancel_in_improvement(self):
        one = _params(input_vectors=8, kernels=8)
        many = _params(input_vectors=64, kernels=64)
        assert improvement(one) == improvement(many)


def test_param_validation():
    with pytest.raises(Exception):
        _params(rows=0)
    with pytest.raises(Exception):
        _params(timeout_wait=-1)
