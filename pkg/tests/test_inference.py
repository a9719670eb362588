from collections import deque
from itertools import product

import numpy as np
import pytest
import torch

from data.sampling import AXES, extract_target
from data.volumedata import MODALITIES, LabelMap, MultimodalVolume, generate_phantom, labels_to_masks, normalize
from inference.pipeline import NetworkPredictor, ProbabilityVolumes, fuse_planes, predict_plane, segment_volume
from inference.postprocess import assign_labels, filter_components, remove_small_components
from network.config import NetworkConfig
from network.model import SegmentationNetwork


class ConstantPredictor:
    def __init__(self, value, size=(64, 64)):
        self.value = value
        self.input_size = size
        self.batch_size = 7
        self.calls = 0
        self.stacks = 0

    def __call__(self, stacks):
        self.calls += 1
        self.stacks += len(stacks)
        return np.full((len(stacks), 3) + self.input_size, self.value, dtype=np.float32)


class TruthPredictor:
    """Возвращает эталонные маски центрального среза."""

    def __init__(self, labels, size=(64, 64)):
        self.labels = labels
        self.input_size = size

    def __call__(self, stacks):
        return np.stack([extract_target(self.labels, s.axis, s.center_index, self.input_size).masks for s in stacks])


def _random_volume(shape, seed=0):
    rng = np.random.default_rng(seed)
    return MultimodalVolume({name: rng.random(shape).astype(np.float32) for name in MODALITIES}, spacing=(1, 1, 1))


def _probabilities(shape, seed):
    rng = np.random.default_rng(seed)
    return ProbabilityVolumes.from_array(rng.random((3,) + shape).astype(np.float32))


@pytest.mark.parametrize("axis", sorted(AXES))
def test_constant_predictor_fills_visible_window(axis):
    volume = _random_volume((40, 70, 30))
    predictor = ConstantPredictor(0.7)
    pv = predict_plane(predictor, volume, axis)

    assert pv.shape == volume.shape
    assert predictor.stacks == volume.shape[AXES[axis]]
    # Ось Y (70) обрезается до 64: по 3 вокселя с каждой стороны остаются нулями
    if axis != "coronal":
        assert np.all(pv.wt[:, 3:67, :] == np.float32(0.7))
        assert not pv.et[:, :3, :].any() and not pv.et[:, 67:, :].any()
    else:
        assert np.all(pv.tc == np.float32(0.7))


def test_predictor_output_shape_is_checked():
    volume = _random_volume((32, 32, 32))
    predictor = ConstantPredictor(0.5)
    predictor.input_size = (64, 64)
    with pytest.raises(ValueError, match="predictor returned shape"):
        predict_plane(predictor, volume, "axial", size=(32, 32))


def test_fuse_identities():
    a, b, c = (_probabilities((6, 5, 4), seed) for seed in range(3))
    same = fuse_planes(a, a, a)
    assert np.array_equal(same.as_array(), a.as_array())

    fused = fuse_planes(a, b, c)
    for order in [(b, c, a), (c, a, b), (b, a, c)]:
        assert np.array_equal(fuse_planes(*order).as_array(), fused.as_array())

    stacked = np.stack([a.as_array(), b.as_array(), c.as_array()])
    assert np.all(fused.as_array() >= stacked.min(axis=0))
    assert np.all(fused.as_array() <= stacked.max(axis=0))

    zeros = ProbabilityVolumes.from_array(np.zeros((3, 1, 1, 1), dtype=np.float32))
    ones = ProbabilityVolumes.from_array(np.ones((3, 1, 1, 1), dtype=np.float32))
    half = ProbabilityVolumes.from_array(np.full((3, 1, 1, 1), 0.5, dtype=np.float32))
    assert np.all(fuse_planes(zeros, half, ones).as_array() == 0.5)


def _one_voxel(wt, tc, et):
    return ProbabilityVolumes(wt=np.array([[[wt]]]), tc=np.array([[[tc]]]), et=np.array([[[et]]]))


@pytest.mark.parametrize("probs, label", [
    ((0.9, 0.2, 0.1), 2),
    ((0.6, 0.7, 0.65), 1),
    ((0.3, 0.4, 0.45), 0),
    ((0.8, 0.8, 0.8), 4),
    ((0.9, 0.9, 0.2), 1),
    ((0.2, 0.3, 0.51), 4),
])
def test_assign_labels_examples(probs, label):
    assert assign_labels(_one_voxel(*probs)).labels[0, 0, 0] == label


def test_assign_labels_threshold():
    assert assign_labels(_one_voxel(0.3, 0.4, 0.45), threshold=0.4).labels[0, 0, 0] == 4


def test_component_size_cutoff():
    labels = np.zeros((30, 30, 30), dtype=np.uint8)
    labels[2:11, 2:13, 2] = 2      # 99 вокселей
    labels[15:25, 15:25, 20] = 2   # 100 вокселей
    filtered = remove_small_components(LabelMap(labels)).labels
    assert not filtered[:, :, 2].any()
    assert np.count_nonzero(filtered) == 100

    empty = LabelMap(np.zeros((5, 5, 5), dtype=np.uint8))
    assert not remove_small_components(empty).labels.any()


def test_connectivity_choice():
    mask = np.zeros((5, 5, 5), dtype=bool)
    mask[1, 1, 1] = mask[2, 2, 2] = True
    assert filter_components(mask, 2, connectivity=26).sum() == 2
    assert filter_components(mask, 2, connectivity=6).sum() == 0
    with pytest.raises(ValueError, match="connectivity"):
        filter_components(mask, 2, connectivity=8)


def _flood_fill_filter(mask, min_size, connectivity=26):
    """Эталон: обход в ширину с 6- или 26-связностью."""
    seen = np.zeros(mask.shape, dtype=bool)
    keep = np.zeros(mask.shape, dtype=bool)
    offsets = [d for d in product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
    if connectivity == 6:
        offsets = [d for d in offsets if sum(map(abs, d)) == 1]
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        component = [start]
        seen[start] = True
        queue = deque([start])
        while queue:
            voxel = queue.popleft()
            for d in offsets:
                n = tuple(v + o for v, o in zip(voxel, d))
                if all(0 <= c < s for c, s in zip(n, mask.shape)) and mask[n] and not seen[n]:
                    seen[n] = True
                    component.append(n)
                    queue.append(n)
        if len(component) >= min_size:
            for voxel in component:
                keep[voxel] = True
    return keep


@pytest.mark.parametrize("connectivity", [6, 26])
def test_component_filter_matches_flood_fill(connectivity):
    rng = np.random.default_rng(connectivity)
    for _ in range(300):
        shape = tuple(int(n) for n in rng.integers(3, 17, size=3))
        mask = rng.random(shape) < rng.uniform(0.05, 0.3)
        min_size = int(rng.integers(1, 30))
        expected = _flood_fill_filter(mask, min_size, connectivity)
        assert np.array_equal(filter_components(mask, min_size, connectivity), expected)


def test_remove_small_components_is_idempotent_and_nested():
    rng = np.random.default_rng(1)
    for _ in range(20):
        labels = LabelMap(rng.choice(np.array([0, 1, 2, 4], dtype=np.uint8), size=(12, 12, 12), p=[0.7, 0.1, 0.1, 0.1]))
        once = remove_small_components(labels, min_size=5)
        twice = remove_small_components(once, min_size=5)
        assert np.array_equal(once.labels, twice.labels)
        assert labels_to_masks(once).is_nested()


def test_truth_predictor_reproduces_filtered_truth():
    volume, labels = generate_phantom(8, shape=(40, 48, 36))
    predictor = TruthPredictor(labels)
    result = segment_volume(predictor, volume)
    assert np.array_equal(result.labels, remove_small_components(labels).labels)
    assert np.array_equal(segment_volume(predictor, volume).labels, result.labels)


def test_network_predictor_pipeline(tiny_m2):
    torch.manual_seed(0)
    model = SegmentationNetwork(tiny_m2)
    predictor = NetworkPredictor(model, batch_size=16)
    volume = normalize(_random_volume((32, 32, 32), seed=4))
    labels, probs = segment_volume(predictor, volume, normalized=True, return_probabilities=True)
    assert labels.shape == volume.shape
    assert set(np.unique(labels.labels)) <= {0, 1, 2, 4}
    assert probs.shape == volume.shape
    assert np.all((probs.as_array() >= 0) & (probs.as_array() <= 1))


def test_network_predictor_checks_modalities():
    model = SegmentationNetwork(NetworkConfig.tiny(num_modalities=2))
    with pytest.raises(ValueError, match="modalities"):
        predict_plane(NetworkPredictor(model), _random_volume((32, 32, 32)), "axial")
