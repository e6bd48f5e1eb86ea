import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qknn_pipeline.data import Dataset
from qknn_pipeline.errors import PairingError, ParameterError, StratificationError
from qknn_pipeline.evaluation import (
    MethodSpec,
    RunResult,
    evaluate_fold,
    evaluate_method,
    pair_accuracies,
    second_model_usage,
    stratified_kfold,
    usage_summary,
)


def toy_dataset(n=40, d=3, seed=0, name="toy"):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    y = np.where(x[:, 0] > 0.5, 1, -1)
    y[:2] = [1, -1]
    return Dataset(name, x, y)


def test_fold_sizes_balanced_dataset():
    plan = stratified_kfold(np.repeat([-1, 1], 50), 5, 0)
    for f in range(5):
        test = plan.test_indices(f)
        assert len(test) == 20 and np.sum(test < 50) == 10


def test_fold_sizes_71():
    labels = np.array([1] * 25 + [-1] * 46)
    plan = stratified_kfold(labels, 5, 0)
    assert sorted(np.bincount(plan.fold_assignments).tolist(), reverse=True) == [15, 14, 14, 14, 14]


@settings(max_examples=50, deadline=None)
@given(st.integers(10, 200), st.floats(0.1, 0.9), st.integers(2, 10), st.integers(0, 2**31))
def test_folds_stratified_and_reproducible(n, ratio, folds, seed):
    labels = np.where(np.arange(n) < int(n * ratio), 1, -1)
    counts = [np.sum(labels == c) for c in (-1, 1)]
    if min(counts) < folds:
        with pytest.raises(StratificationError):
            stratified_kfold(labels, folds, seed)
        return
    plan = stratified_kfold(labels, folds, seed)
    np.testing.assert_array_equal(plan.fold_assignments, stratified_kfold(labels, folds, seed).fold_assignments)
    sizes = np.bincount(plan.fold_assignments, minlength=folds)
    assert sizes.max() - sizes.min() <= 1
    for c, total in zip((-1, 1), counts):
        per_fold = np.bincount(plan.fold_assignments[labels == c], minlength=folds)
        assert np.all(np.abs(per_fold - total / folds) <= 1)


def test_folds_reject_bad_arguments():
    with pytest.raises(ParameterError):
        stratified_kfold([1, -1], 1, 0)


def test_second_model_usage():
    assert second_model_usage([False] * 4) == 0.0
    assert second_model_usage([True] * 4) == 1.0
    assert second_model_usage([True, False]) == 0.5


def test_deterministic_method_ignores_runs():
    ds = toy_dataset()
    spec = MethodSpec("cl", "pipeline")
    a = evaluate_method(spec, ds, [3, 5], runs=1)
    b = evaluate_method(spec, ds, [3, 5], runs=5)
    assert [r.fold_accuracies for r in a] == [r.fold_accuracies for r in b]
    assert all(r.runs == 1 for r in b)


def test_perfect_classifier_scores_one():
    x = np.vstack([np.tile([1.0, 0.0], (10, 1)), np.tile([0.0, 1.0], (10, 1))])
    ds = Dataset("separable", x, np.repeat([1, -1], 10))
    for r in evaluate_method(MethodSpec("cl"), ds, [3]):
        assert r.fold_accuracies == [1.0] * 5


def test_classical_and_statevector_agree():
    ds = toy_dataset(60)
    a = evaluate_method(MethodSpec("cl"), ds, [3, 5, 7])
    b = evaluate_method(MethodSpec("sv", knn_modality="statevector", classifier_modality="statevector"), ds, [3, 5, 7])
    assert [r.fold_accuracies for r in a] == [r.fold_accuracies for r in b]


def test_accuracy_invariant_to_instance_order():
    ds = toy_dataset(50)
    perm = np.random.default_rng(3).permutation(50)
    shuffled = Dataset("toy", ds.features[perm], ds.labels[perm])
    plan = stratified_kfold(ds.labels, 5, 0)
    plan_shuffled = type(plan)(5, 0, plan.fold_assignments[perm])
    # stochastic streams are keyed by instance id, so repeated evaluation is identical
    spec = MethodSpec("si", knn_modality="simulation", classifier_modality="statevector")
    a = evaluate_fold(spec, ds, plan, 0, [3], 2, 1, 256)
    b = evaluate_fold(spec, ds, plan, 0, [3], 2, 1, 256)
    assert a.predictions == b.predictions
    spec = MethodSpec("cl")
    for fold in range(5):
        a = evaluate_fold(spec, ds, plan, fold, [3], 1)
        b = evaluate_fold(spec, shuffled, plan_shuffled, fold, [3], 1)
        assert a.accuracy[3] == b.accuracy[3]


def test_classifier_method_has_no_k():
    results = evaluate_method(MethodSpec("qbc", "classifier", classifier_modality="statevector"), toy_dataset(), [3, 5])
    assert len(results) == 1 and results[0].k is None


def rr(method, dataset, k, accs):
    return RunResult(method, dataset, k, accs, [0.0] * len(accs), 1)


def test_pairing_and_broadcast():
    a = [rr("A", "d1", 3, [0.9, 0.8]), rr("A", "d1", 5, [0.7, 0.6])]
    b = [rr("B", "d1", None, [0.5, 0.4])]
    pairs = pair_accuracies(a, b)
    assert [(p.k, p.fold, p.accuracy_a, p.accuracy_b) for p in pairs] == [
        (3, 0, 0.9, 0.5),
        (3, 1, 0.8, 0.4),
        (5, 0, 0.7, 0.5),
        (5, 1, 0.6, 0.4),
    ]
    with pytest.raises(PairingError) as exc:
        pair_accuracies(a, [rr("B", "d2", 3, [0.5, 0.4])])
    assert "missing in B" in str(exc.value) and "d1" in str(exc.value)


def test_usage_summary():
    results = [
        RunResult("m", "a", 3, [1, 1], [0.2, 0.4], 1),
        RunResult("m", "b", 3, [1, 1], [0.6, 0.6], 1),
    ]
    mean, std = usage_summary(results)[3]
    assert mean == pytest.approx(0.45) and std == pytest.approx(0.15)


def test_result_round_trip():
    r = rr("A", "d", 3, [0.5, 1.0])
    assert RunResult.from_dict(r.to_dict()) == r
