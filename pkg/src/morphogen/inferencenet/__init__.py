"""Variational family: a CRF joint tagger and lemmatizer over edit-tree labels."""

from .crf import CRFConfig, CRFModel, build_crf, featurize, form_observations, tag_observations, train_crf
from .edittree import IDENTITY, EditTree, apply_edit_tree, extract_edit_tree

__all__ = [
    "CRFConfig", "CRFModel", "EditTree", "IDENTITY", "apply_edit_tree", "build_crf", "extract_edit_tree",
    "featurize", "form_observations", "tag_observations", "train_crf",
]
