"""
Data package initialization.
Contains multimodal volume I/O, synthetic phantoms and 2.5D slice sampling.
"""
from .sampling import (SliceStack, SliceTarget, TrainingCase, collate, extract_stack, extract_target,
                       sample_epoch)
from .volumedata import (MODALITIES, LabelMap, MultiLabelMasks, MultimodalVolume, generate_phantom,
                         labels_to_masks, load_case, load_dataset, masks_to_labels, normalize, save_case)

__all__ = [
    'SliceStack',
    'SliceTarget',
    'TrainingCase',
    'collate',
    'extract_stack',
    'extract_target',
    'sample_epoch',
    'MODALITIES',
    'LabelMap',
    'MultiLabelMasks',
    'MultimodalVolume',
    'generate_phantom',
    'labels_to_masks',
    'load_case',
    'load_dataset',
    'masks_to_labels',
    'normalize',
    'save_case'
]
