"""Patient-grouped, label-stratified fold assignment."""

import numpy as np

from .errors import InsufficientPatients


def group_labels(y, groups):
    """Sorted unique groups and one label per group (the maximum night label)."""
    g = np.asarray(groups)
    y = np.asarray(y).astype(np.int64)
    uniq, inv = np.unique(g, return_inverse=True)
    lab = np.zeros(uniq.size, dtype=np.int64)
    np.maximum.at(lab, inv, y)
    return uniq, inv, lab


def stratified_group_kfold(y, groups, k=5, seed=0):
    """List of (train_idx, val_idx) with whole groups per fold and labels spread evenly.

    Groups of each class are shuffled with ``seed`` and dealt round-robin;
    the dealing continues across classes so fold sizes stay balanced.
    """
    uniq, inv, lab = group_labels(y, groups)
    if uniq.size < k:
        raise InsufficientPatients(f"{uniq.size} groups cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(uniq.size, dtype=np.int64)
    pos = 0
    for c in np.unique(lab):
        members = np.flatnonzero(lab == c)
        members = members[rng.permutation(members.size)]
        fold_of[members] = (pos + np.arange(members.size)) % k
        pos += members.size
    night_fold = fold_of[inv]
    out = []
    for f in range(k):
        val = np.flatnonzero(night_fold == f)
        tr = np.flatnonzero(night_fold != f)
        assert_disjoint(groups, tr, val)
        out.append((tr, val))
    return out


def assert_disjoint(groups, train_idx, val_idx):
    g = np.asarray(groups)
    shared = set(g[train_idx].tolist()) & set(g[val_idx].tolist())
    if shared:
        raise AssertionError(f"groups in both train and validation: {sorted(shared)[:5]}")
