from dataclasses import replace

import numpy as np
import pytest
import torch

from dlref import EmptySplitError
from dlref.data import SegmentBatch, SplitData
from dlref.train import train_loocv, train_split

from conftest import TOY, toy_split


@pytest.fixture(scope="module")
def trained(separable_split):
    return train_split(separable_split, TOY, seed=3)


class TestTrainSplit:
    def test_validation_loss_improves(self, trained):
        assert trained.best_val_loss < trained.history[0].val_loss

    def test_checkpoint_is_lowest_val_loss(self, trained):
        losses = [r.val_loss for r in trained.history]
        assert trained.best_val_loss == min(losses)
        assert trained.best_epoch == losses.index(min(losses)) + 1

    def test_checkpoint_weights_reproduce_val_loss(self, trained,
                                                   separable_split):
        from dlref.train import _mean_loss
        model = trained.rebuild(TOY)
        val = _mean_loss(model, separable_split.validation, TOY.batch_size)
        assert val == pytest.approx(trained.best_val_loss, rel=1e-6)

    def test_early_stop_honors_patience(self, trained):
        n = len(trained.history)
        if n < TOY.max_epochs:
            assert n == trained.best_epoch + TOY.patience
        else:
            assert n - trained.best_epoch <= TOY.patience

    def test_history_epochs_are_one_based(self, trained):
        assert [r.epoch for r in trained.history] == \
            list(range(1, len(trained.history) + 1))

    def test_same_seed_reproduces_weights(self, trained, separable_split):
        again = train_split(separable_split, TOY, seed=3)
        assert again.best_epoch == trained.best_epoch
        for key, value in trained.state_dict.items():
            assert torch.equal(value, again.state_dict[key]), key

    def test_different_seed_differs(self, trained, separable_split):
        other = train_split(separable_split, TOY, seed=4)
        assert any(not torch.equal(trained.state_dict[k], other.state_dict[k])
                   for k in trained.state_dict)


class TestEmptySplits:
    def empty_batch(self):
        return SegmentBatch(x=torch.empty((0, 1, 0, 0)),
                            y=torch.empty(0), t_onset_min=np.empty(0))

    def test_empty_train_rejected(self, separable_split):
        split = SplitData(patient="p01", seizure=1, run=0,
                          train=self.empty_batch(),
                          validation=separable_split.validation,
                          test=separable_split.test)
        with pytest.raises(EmptySplitError):
            train_split(split, TOY)

    def test_empty_validation_rejected(self, separable_split):
        split = SplitData(patient="p01", seizure=1, run=0,
                          train=separable_split.train,
                          validation=self.empty_batch(),
                          test=separable_split.test)
        with pytest.raises(EmptySplitError):
            train_split(split, TOY)

    def test_no_splits_rejected(self):
        with pytest.raises(EmptySplitError):
            train_loocv([], TOY)


class TestTrainLoocv:
    QUICK = replace(TOY, max_epochs=2, patience=2)

    def test_checkpoints_keyed_by_seizure_and_run(self):
        rng = np.random.default_rng(11)
        splits = [toy_split(rng, seizure=1), toy_split(rng, seizure=2)]
        checkpoints = train_loocv(splits, self.QUICK, seed=5)
        assert set(checkpoints) == {(1, 0), (2, 0)}

    def test_split_seed_independent_of_companions(self):
        rng = np.random.default_rng(11)
        splits = [toy_split(rng, seizure=1), toy_split(rng, seizure=2)]
        full = train_loocv(splits, self.QUICK, seed=5)
        alone = train_loocv([splits[1]], self.QUICK, seed=5)
        for key, value in full[(2, 0)].state_dict.items():
            assert torch.equal(value, alone[(2, 0)].state_dict[key]), key
