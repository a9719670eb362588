import nibabel as nib
import numpy as np
import pytest

from data.volumedata import (MODALITIES, LabelMap, MultiLabelMasks, MultimodalVolume, generate_phantom,
                             labels_to_masks, load_case, load_case_labels, load_dataset, masks_to_labels,
                             normalize, read_seed_record, save_case)


def _volume(shape=(8, 9, 10), seed=0, case_id="case"):
    rng = np.random.default_rng(seed)
    return MultimodalVolume({name: rng.normal(100, 20, shape).astype(np.float32) for name in MODALITIES},
                            spacing=(1.0, 1.0, 1.0), case_id=case_id)


def test_label_map_rejects_illegal_values():
    with pytest.raises(ValueError, match="illegal label value"):
        LabelMap(np.array([[[0, 1], [3, 4]]]))


def test_masks_are_nested_and_invert(phantom):
    _, labels = phantom
    masks = labels_to_masks(labels)
    assert masks.is_nested()
    assert np.array_equal(masks_to_labels(masks).labels, labels.labels)


def test_masks_to_labels_restores_nesting():
    wt = np.zeros((4, 4, 4), dtype=bool)
    et = np.zeros_like(wt)
    et[0, 0, 0] = True
    labels = masks_to_labels(MultiLabelMasks(wt=wt, tc=wt.copy(), et=et))
    assert not labels.labels.any()


def test_modality_shape_mismatch():
    grids = {name: np.zeros((4, 4, 4), dtype=np.float32) for name in MODALITIES}
    grids["t2"] = np.zeros((4, 4, 5), dtype=np.float32)
    with pytest.raises(ValueError, match="shape mismatch"):
        MultimodalVolume(grids, spacing=(1, 1, 1))


def test_normalize_range_and_constant_modality():
    volume = _volume()
    volume.modalities["t1"] = np.full(volume.shape, 7.0, dtype=np.float32)
    result = normalize(volume)
    assert not result.modalities["t1"].any()
    for name in ("t1ce", "t2", "flair"):
        grid = result.modalities[name]
        assert grid.dtype == np.float32
        assert grid.min() == 0.0 and grid.max() == 1.0


def test_normalize_rejects_nan():
    volume = _volume()
    volume.modalities["flair"][0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="flair"):
        normalize(volume)


def test_save_and_load_case(tmp_path, phantom):
    volume, labels = phantom
    save_case(volume, labels, tmp_path / volume.case_id, description="phantom seed=3")

    loaded, loaded_labels = load_case(tmp_path / volume.case_id, require_labels=True)
    assert loaded.case_id == volume.case_id
    assert loaded.names == MODALITIES
    assert loaded.spacing == (1.0, 1.0, 1.0)
    for name in MODALITIES:
        assert np.array_equal(loaded.modalities[name], volume.modalities[name])
    assert np.array_equal(loaded_labels.labels, labels.labels)
    assert read_seed_record(tmp_path / volume.case_id) == 3
    assert np.array_equal(load_case_labels(tmp_path / volume.case_id).labels, labels.labels)


def test_load_case_without_labels(tmp_path):
    volume = _volume(case_id="nolabels")
    save_case(volume, None, tmp_path / "nolabels")
    loaded, labels = load_case(tmp_path / "nolabels")
    assert labels is None
    assert loaded.shape == volume.shape
    with pytest.raises(FileNotFoundError, match="label"):
        load_case(tmp_path / "nolabels", require_labels=True)
    assert read_seed_record(tmp_path / "nolabels") is None


def test_load_case_missing_modality(tmp_path):
    volume = _volume(case_id="c1")
    save_case(volume, None, tmp_path / "c1")
    (tmp_path / "c1" / "c1_t2.nii.gz").unlink()
    with pytest.raises(FileNotFoundError, match="t2"):
        load_case(tmp_path / "c1")


def test_load_case_spacing_mismatch(tmp_path):
    volume = _volume(case_id="c2")
    save_case(volume, None, tmp_path / "c2")
    image = nib.Nifti1Image(volume.modalities["flair"], np.diag([2.0, 1.0, 1.0, 1.0]))
    nib.save(image, str(tmp_path / "c2" / "c2_flair.nii.gz"))
    with pytest.raises(ValueError, match="spacing mismatch"):
        load_case(tmp_path / "c2")


def test_load_case_illegal_label_file(tmp_path):
    volume = _volume(case_id="c3")
    save_case(volume, None, tmp_path / "c3")
    bad = np.zeros(volume.shape, dtype=np.uint8)
    bad[1, 1, 1] = 3
    nib.save(nib.Nifti1Image(bad, np.eye(4)), str(tmp_path / "c3" / "c3_seg.nii.gz"))
    with pytest.raises(ValueError, match="illegal label value"):
        load_case(tmp_path / "c3")


def test_load_dataset_sorted(phantom_dataset):
    cases = load_dataset(phantom_dataset, require_labels=True)
    assert [v.case_id for v, _ in cases] == ["case_000", "case_001"]


def test_phantom_is_deterministic():
    a_volume, a_labels = generate_phantom(5, shape=(32, 40, 36))
    b_volume, b_labels = generate_phantom(5, shape=(32, 40, 36))
    assert a_volume.shape == (32, 40, 36)
    assert np.array_equal(a_labels.labels, b_labels.labels)
    for name in MODALITIES:
        assert np.array_equal(a_volume.modalities[name], b_volume.modalities[name])
    c_volume, _ = generate_phantom(6, shape=(32, 40, 36))
    assert not np.array_equal(a_volume.modalities["flair"], c_volume.modalities["flair"])


def test_phantom_contains_all_classes(phantom):
    _, labels = phantom
    masks = labels_to_masks(labels)
    assert masks.is_nested()
    assert masks.et.any()
    assert (masks.tc & ~masks.et).any() or masks.et.sum() == masks.tc.sum()
    assert (masks.wt & ~masks.tc).any()


def test_phantom_shape_too_small():
    with pytest.raises(ValueError, match="shape too small"):
        generate_phantom(0, shape=(16, 16, 16))


def test_phantom_whole_tumor_fraction():
    _, labels = generate_phantom(0, shape=(64, 64, 64))
    fraction = np.count_nonzero(labels.labels) / labels.labels.size
    assert 0.005 <= fraction <= 0.15


def test_phantom_invariants_over_many_seeds():
    rng = np.random.default_rng(2024)
    for seed in rng.integers(0, 2**31, size=100):
        volume, labels = generate_phantom(int(seed), shape=(64, 64, 64))
        assert volume.names == MODALITIES
        assert labels.shape == volume.shape
        assert set(np.unique(labels.labels)) <= {0, 1, 2, 4}
        masks = labels_to_masks(labels)
        assert masks.is_nested(), seed
        assert masks.et.any(), seed
        for name in MODALITIES:
            assert np.all(np.isfinite(volume.modalities[name])), (seed, name)


def test_normalize_is_idempotent(phantom):
    volume, _ = phantom
    once = normalize(volume)
    twice = normalize(once)
    for name in MODALITIES:
        assert np.array_equal(once.modalities[name], twice.modalities[name]), name
