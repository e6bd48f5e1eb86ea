"""Acceptance criteria, each checked at its stated tolerance.

Criteria that need the full experiment grid share one session-scoped run of
configs/paper_15qubit.yaml (5 folds, k in {3, 5, 7, 9}, 1024 shots, 5 runs).
"""

import itertools
import json
import time

import numpy as np
import pytest

from oracles import qbc_closed_form, qbc_p1_enumerated, qknn_closed_form, qknn_q_values, wilcoxon_enumerated
from qknn_pipeline.cli import main
from qknn_pipeline.data import ceil_log2, load_dataset, unit_norm_rows
from qknn_pipeline.evaluation import pair_accuracies, stratified_kfold, wilcoxon_per_k
from qknn_pipeline.pipeline import ModalityConfig, run_pipeline
from qknn_pipeline.qbc import LabeledNeighbors, QbcCircuitSpec, build_qbc_state, qbc_p1_statevector
from qknn_pipeline.qknn import QknnCircuitSpec, build_qknn_state, qknn_scores_statevector
from qknn_pipeline.statevector import marginal_array, sample_measurements, swap_test
from qknn_pipeline.stats import wilcoxon_signed_rank

K_VALUES = (3, 5, 7, 9)
TIE_FLAGS = ("boundary_tie", "tie_policy_applied", "zero_vote", "knn_degenerate", "vote_tie")
USAGE_REFERENCE = {3: 0.245, 5: 0.357, 7: 0.406, 9: 0.461}


def p_values(pairs):
    return {k: res.p_value for k, res in wilcoxon_per_k(pairs).items()}


def fmt(ps):
    return ", ".join(f"k={k}: {p:.3g}" for k, p in ps.items())


def test_1_modality_equivalence(grid, criterion):
    _, by_method, _ = grid
    cl, sv = by_method["cl-cl"], by_method["sv-sv"]
    assert len({r.dataset for r in cl}) == 12
    sv_by_key = {(r.dataset, r.k): r for r in sv}
    mismatched_tie_free, mismatched_with_ties, folds = 0, 0, 0
    for a in cl:
        b = sv_by_key[(a.dataset, a.k)]
        for fold, (acc_a, acc_b) in enumerate(zip(a.fold_accuracies, b.fold_accuracies)):
            folds += 1
            tied = any(d.get(flag) for d in (a.fold_diagnostics[fold], b.fold_diagnostics[fold]) for flag in TIE_FLAGS)
            if acc_a != acc_b:
                if tied:
                    mismatched_with_ties += 1
                else:
                    mismatched_tie_free += 1
    ps = p_values(pair_accuracies(cl, sv))
    passed = mismatched_tie_free == 0 and all(ps[k] > 0.05 for k in K_VALUES)
    criterion(
        1,
        "cl-cl == sv-sv on tie-free folds, p > 0.05 per k",
        passed,
        f"{folds} folds, {mismatched_tie_free} tie-free mismatches, {mismatched_with_ties} tied mismatches; p {fmt(ps)}",
    )
    assert passed


def test_2_shot_sensitivity(grid, criterion):
    _, by_method, _ = grid
    cl, si = by_method["cl-cl"], by_method["si-cl"]
    mean = lambda rs, ds: np.mean([np.mean(r.fold_accuracies) for r in rs if r.dataset == ds])
    datasets = sorted({r.dataset for r in cl})
    worse = sum(mean(si, d) < mean(cl, d) for d in datasets)
    ps = p_values(pair_accuracies(si, cl))
    passed = worse >= 8 and all(ps[k] < 0.05 for k in K_VALUES)
    criterion(2, "si-cl below cl-cl on >= 8/12 datasets, p < 0.05 per k", passed, f"{worse}/12 worse; p {fmt(ps)}")
    assert passed


def test_3_locality_benefit(grid, criterion):
    _, by_method, skipped = grid
    assert {(s["method"], s["dataset"]) for s in skipped if s["method"] == "qbc-sv"} == {
        ("qbc-sv", "02_transfusion__sub_titanic")
    }
    qbc = by_method["qbc-sv"]
    comparable = {r.dataset for r in qbc}
    pipeline = [r for r in by_method["sv-sv"] if r.dataset in comparable]
    pairs = pair_accuracies(pipeline, qbc)
    ps = p_values(pairs)
    better = {
        k: bool(np.mean([p.accuracy_a for p in pairs if p.k == k]) > np.mean([p.accuracy_b for p in pairs if p.k == k]))
        for k in K_VALUES
    }
    passed = len(comparable) == 11 and all(ps[k] < 0.05 and better[k] for k in K_VALUES)
    criterion(3, "sv-sv beats standalone sv classifier, p < 0.05 per k (11 datasets)", passed, f"p {fmt(ps)}")
    assert passed


def test_4_qubit_formulas(grid, criterion):
    cfg, _, _ = grid
    ok = QknnCircuitSpec(168, 12).total_qubits == 17 and QbcCircuitSpec(9, 12).total_qubits == 12
    checked = 0
    for path in cfg.datasets:
        ds = load_dataset(path)
        plan = stratified_kfold(ds.labels, cfg.num_folds, cfg.fold_seed)
        for fold in range(cfg.num_folds):
            n, d = len(plan.train_indices(fold)), ds.num_features
            knn = QknnCircuitSpec(n, d).total_qubits
            qbc = QbcCircuitSpec(n, d).total_qubits
            ok &= knn == 1 + ceil_log2(n) + 2 * ceil_log2(d)
            ok &= (knn <= qbc) == (ceil_log2(d) <= 3)
            for k in K_VALUES:
                ok &= QbcCircuitSpec(k, d).total_qubits == 3 + ceil_log2(k) + ceil_log2(d) + 1
            checked += 1
    criterion(4, "qubit formulas (17 k-NN, 12 classifier, advantage relation)", ok, f"{checked} (dataset, fold) cells")
    assert ok


def test_5_analytic_oracles(criterion):
    rng = np.random.default_rng(20240501)
    start = time.perf_counter()
    worst_q, worst_p, instances = 0.0, 0.0, 0
    while instances < 1000:
        n, d, k = rng.integers(2, 9), rng.integers(1, 9), rng.integers(1, 9)
        train = unit_norm_rows(rng.random((n, d)))
        test = unit_norm_rows(rng.random((1, d)))[0]
        if 1 - np.mean((train @ test) ** 2) < 1e-6:
            continue
        q = qknn_scores_statevector(build_qknn_state(train, test), QknnCircuitSpec(n, d)).q_values
        oracle, _ = qknn_q_values(train, test)
        worst_q = max(worst_q, np.abs(q - oracle).max(), np.abs(q - qknn_closed_form(train, test)).max())

        x = unit_norm_rows(rng.random((k, d)) - 0.3)
        y = rng.choice([-1, 1], k)
        p1 = qbc_p1_statevector(build_qbc_state(LabeledNeighbors(x, y), test))
        worst_p = max(worst_p, abs(p1 - qbc_p1_enumerated(x, y, test)), abs(p1 - qbc_closed_form(x, y, test)))
        instances += 1
    elapsed = time.perf_counter() - start
    passed = worst_q <= 1e-9 and worst_p <= 1e-9 and elapsed <= 60
    criterion(
        5,
        "statevector Q(i) and P(1) match enumeration and closed forms within 1e-9",
        passed,
        f"{instances} instances, max |dQ| {worst_q:.2e}, max |dP1| {worst_p:.2e}, {elapsed:.1f} s",
    )
    assert passed


def test_6_swap_test_law(criterion):
    rng = np.random.default_rng(7)
    worst, inside, trials = 0.0, 0, 0
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        phi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi, phi = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
        state = swap_test(psi, phi)
        p0 = marginal_array(state, [0])[0]
        worst = max(worst, abs(p0 - 0.5 * (1 + abs(np.vdot(psi, phi)) ** 2)))
        sigma = np.sqrt(p0 * (1 - p0) / 1024)
        for _ in range(10):
            est = sample_measurements(state, [0], 1024, rng).counts.get("0", 0) / 1024
            inside += abs(est - p0) <= 4 * sigma
            trials += 1
    rate = inside / trials
    passed = worst <= 1e-9 and rate >= 0.999
    criterion(6, "SWAP-test P(0) law and 4-sigma sampling bound", passed, f"max error {worst:.2e}, {rate:.4%} of {trials} trials inside")
    assert passed


def test_7_second_model_usage(grid, criterion):
    _, by_method, _ = grid
    cl = by_method["cl-cl"]
    usage = {}
    for k in K_VALUES:
        per_dataset = [np.mean(r.fold_usage) for r in cl if r.k == k]
        usage[k] = (float(np.mean(per_dataset)), float(np.std(per_dataset)))
    passed = all(abs(usage[k][0] - USAGE_REFERENCE[k]) <= 0.05 for k in K_VALUES)
    criterion(
        7,
        "cosine second-model usage within 0.05 of the reference per k",
        passed,
        ", ".join(f"k={k}: {m:.3f} +/- {s:.3f} (ref {USAGE_REFERENCE[k]})" for k, (m, s) in usage.items()),
    )
    assert passed


def test_8_distance_metric(grid, criterion):
    _, by_method, _ = grid
    pairs = pair_accuracies(by_method["knn-euc"], by_method["knn-cos"]) + pair_accuracies(
        by_method["knnc-euc"], by_method["knnc-cos"]
    )
    ps = p_values(pairs)
    better = {
        k: bool(np.mean([p.accuracy_a for p in pairs if p.k == k]) > np.mean([p.accuracy_b for p in pairs if p.k == k]))
        for k in K_VALUES
    }
    passed = all(ps[k] < 0.05 and better[k] for k in K_VALUES)
    criterion(8, "Euclidean k-NN baselines beat cosine, p < 0.05 per k", passed, f"p {fmt(ps)}; euclidean better {better}")
    assert passed


def test_9_wilcoxon(criterion):
    ok = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0] * 5).p_value == 0.0625
    patterns = 0
    for n in range(1, 11):
        for signs in itertools.product((-1, 1), repeat=n):
            d = np.arange(1, n + 1) * np.array(signs)
            ok &= abs(wilcoxon_signed_rank(d, np.zeros(n)).p_value - wilcoxon_enumerated(d)) <= 1e-12
            patterns += 1
    criterion(9, "Wilcoxon exact path matches enumeration for n <= 10; n=5 gives 0.0625", ok, f"{patterns} sign patterns")
    assert ok


def test_10_performance_and_worker_determinism(tmp_path, criterion):
    rng = np.random.default_rng(0)
    train = rng.random((168, 12))
    labels = np.where(rng.random(168) > 0.5, 1, -1)
    start = time.perf_counter()
    run_pipeline(train, labels, rng.random(12), 9, ModalityConfig("statevector", "statevector"))
    elapsed = time.perf_counter() - start

    import yaml

    from conftest import ROOT

    cfg = {
        "datasets": [str(ROOT / "data" / name) for name in ("01_iris_setosa_virginica.csv", "06_glasses_1_2.csv")],
        "k_values": [3, 9],
        "shots": 1024,
        "runs": 2,
        "seed": 11,
        "methods": [
            {"name": "si-si", "knn_modality": "simulation", "classifier_modality": "simulation"},
            {"name": "qbc-si", "kind": "classifier", "classifier_modality": "simulation"},
        ],
        "comparisons": [["si-si", "qbc-si"]],
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    outputs = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        assert main(["run", "--config", str(path), "--output", str(out), "--workers", str(workers)]) == 0
        payload = json.loads((out / "results.json").read_text(encoding="utf-8"))
        payload["metadata"].pop("timestamp")
        outputs.append((payload, (out / "stats.csv").read_bytes(), (out / "scatter.csv").read_bytes()))
    identical = outputs[0] == outputs[1]
    passed = elapsed <= 10 and identical
    criterion(10, "sv-sv prediction at N=168, d=12, k=9 within 10 s; outputs identical across workers", passed, f"{elapsed:.3f} s, identical={identical}")
    assert passed
