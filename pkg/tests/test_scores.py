import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlscore.data import DataError, Dataset, standardize
from mlscore.margins import (
    InteractionWeights,
    MarginConfig,
    MarginKind,
    MarginModel,
    build_margin_model,
    interaction_weights,
)
from mlscore.scores import (
    KERNEL_MODES,
    KernelConfig,
    ScoreReport,
    laplacian_score,
    mls,
    mls_naive,
    ranked_rows,
    select_top,
)


def _heat_affinity(X, bandwidth=None):
    n = X.shape[0]
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    if bandwidth is None:
        bandwidth = sq[np.triu_indices(n, k=1)].mean()
        if bandwidth <= 0:
            bandwidth = 1.0
    return np.exp(-sq / bandwidth)


def _ls_oracle(X, S):
    """Plain-loop f~' L f~ / f~' D f~ per feature."""
    d = S.sum(axis=1)
    out = []
    for r in range(X.shape[1]):
        f = X[:, r]
        ftil = f - (f @ d) / d.sum()
        num = 0.0
        for i in range(len(f)):
            for j in range(len(f)):
                num += 0.5 * S[i, j] * (ftil[i] - ftil[j]) ** 2
        out.append(num / (d @ (ftil * ftil)))
    return np.asarray(out)


def _report(scores, method="ls", constant=None):
    scores = np.asarray(scores, dtype=float)
    if constant is None:
        constant = np.zeros(scores.size, dtype=bool)
    return ScoreReport(
        method=method,
        scores=scores,
        params={},
        constant_feature_flags=np.asarray(constant),
        feature_names=[f"f{j}" for j in range(scores.size)],
    )


# ----------------------------------------------------------- laplacian_score


def test_ls_matches_loop_oracle(rng):
    X = rng.standard_normal((12, 4))
    ds = Dataset(values=X, feature_names=["a", "b", "c", "d"])
    report = laplacian_score(ds)
    oracle = _ls_oracle(X, _heat_affinity(X))
    assert np.max(np.abs(report.scores - oracle)) < 1e-12


def test_ls_duplicated_column_scores_equal(rng):
    f = rng.standard_normal(15)
    ds = Dataset(values=np.column_stack([f, f]), feature_names=["a", "b"])
    report = laplacian_score(ds)
    assert report.scores[0] == report.scores[1]


def test_ls_affine_pair_scores_equal(rng):
    f = rng.standard_normal(20)
    ds = Dataset(values=np.column_stack([f, 2.0 * f + 3.0]), feature_names=["a", "b"])
    report = laplacian_score(ds)
    assert abs(report.scores[0] - report.scores[1]) <= 1e-9 * max(1.0, abs(report.scores[0]))


def test_ls_prefers_cluster_structure(rng):
    # two tight clusters along one feature; the other is plain noise
    half = 15
    clustered = np.concatenate([rng.normal(-3, 0.2, half), rng.normal(3, 0.2, half)])
    noise = rng.standard_normal(2 * half)
    ds = Dataset(values=np.column_stack([clustered, noise]), feature_names=["c", "n"])
    report = laplacian_score(ds)
    assert report.scores[0] < report.scores[1]


def test_ls_constant_feature_scores_inf(rng):
    X = np.column_stack([np.full(10, 2.0), rng.standard_normal(10)])
    report = laplacian_score(Dataset(values=X, feature_names=["c", "f"]))
    assert np.isinf(report.scores[0])
    assert report.constant_feature_flags.tolist() == [True, False]


def test_ls_all_constant_rejected():
    ds = Dataset(values=np.ones((5, 2)), feature_names=["a", "b"])
    with pytest.raises(DataError, match="all features are constant"):
        laplacian_score(ds)


def test_ls_fixed_bandwidth_matches_oracle(rng):
    X = rng.standard_normal((10, 3))
    ds = Dataset(values=X, feature_names=["a", "b", "c"])
    report = laplacian_score(ds, KernelConfig(bandwidth=0.7))
    oracle = _ls_oracle(X, _heat_affinity(X, bandwidth=0.7))
    assert np.max(np.abs(report.scores - oracle)) < 1e-12


def test_ls_binary_knn_kernel(rng):
    X = rng.standard_normal((9, 3))
    ds = Dataset(values=X, feature_names=["a", "b", "c"])
    config = KernelConfig(mode="binary-knn", n_neighbors=3)
    report = laplacian_score(ds, config)
    # rebuild the graph the slow way: union of directed 3-nearest edges
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    S = np.zeros((9, 9))
    for i in range(9):
        order = [j for j in np.argsort(sq[i], kind="stable") if j != i]
        for j in order[:3]:
            S[i, j] = 1.0
    S = np.maximum(S, S.T)
    np.fill_diagonal(S, 1.0)
    oracle = _ls_oracle(X, S)
    assert np.max(np.abs(report.scores - oracle)) < 1e-12


def test_ls_binary_knn_neighbor_bound(rng):
    ds = Dataset(values=rng.standard_normal((4, 2)), feature_names=["a", "b"])
    with pytest.raises(ValueError, match="n_neighbors"):
        laplacian_score(ds, KernelConfig(mode="binary-knn", n_neighbors=4))


def test_ls_printed_kernel_matches_oracle(rng):
    X = rng.standard_normal((8, 2)) * 0.1
    ds = Dataset(values=X, feature_names=["a", "b"])
    report = laplacian_score(ds, KernelConfig(mode="printed", bandwidth=1.0))
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    oracle = _ls_oracle(X, np.exp(dist / 1.0))
    assert np.max(np.abs(report.scores - oracle)) < 1e-10


@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_ls_printed_kernel_overflow_does_not_raise():
    # the positive exponent blows up on spread-out data; it must not crash
    X = np.array([[0.0, 0.0], [5000.0, 0.0], [0.0, 5000.0]])
    report = laplacian_score(
        Dataset(values=X, feature_names=["a", "b"]),
        KernelConfig(mode="printed", bandwidth=1.0),
    )
    assert report.scores.shape == (2,)


def test_kernel_config_validation():
    with pytest.raises(ValueError, match="mode"):
        KernelConfig(mode="nope")
    with pytest.raises(ValueError, match="bandwidth"):
        KernelConfig(bandwidth=-1.0)
    with pytest.raises(ValueError, match="n_neighbors"):
        KernelConfig(n_neighbors=0)
    assert set(KERNEL_MODES) == {"heat", "binary-knn", "printed"}


# ------------------------------------------------------------------- mls


def test_mls_naive_hand_value():
    W = np.array([[1.0, math.exp(-1.0)], [math.exp(-1.0), 1.0]])
    weights = InteractionWeights(weights=W, t=1.0)
    u = np.array([math.log(2.0), 0.0])
    # single ordered pair contributes e^-1 * ln 2, then Var([0,1]) = 0.5
    expected = 2.0 * math.exp(-1.0) * math.log(2.0)
    assert abs(mls_naive([0.0, 1.0], weights, u) - expected) < 1e-12


def test_mls_naive_rejects_constant():
    weights = InteractionWeights(weights=np.ones((2, 2)), t=1.0)
    with pytest.raises(ValueError, match="variance is zero"):
        mls_naive([3.0, 3.0], weights, np.ones(2))


def test_mls_matches_naive(rng):
    X = rng.standard_normal((25, 6))
    ds = Dataset(values=X, feature_names=[f"f{j}" for j in range(6)])
    scaled, _ = standardize(ds)
    model = build_margin_model(scaled, MarginConfig(quantile=0.1))
    report = mls(scaled, model)
    W = interaction_weights(model)
    for r in range(6):
        naive = mls_naive(scaled.values[:, r], W, model.u)
        assert abs(report.scores[r] - naive) <= 1e-9 * max(abs(naive), 1e-12)


def test_mls_hand_value_through_report():
    W = np.array([[1.0, math.exp(-1.0)], [math.exp(-1.0), 1.0]])
    model = MarginModel(
        config=MarginConfig(),
        kinds=[MarginKind.RIGHT],
        cutoffs=[(None, 0.5)],
        membership=np.array([[True], [False]]),
        counts=np.array([1, 0]),
        in_dataset_margin=np.array([True, False]),
        u=np.array([math.log(2.0), 0.0]),
        margin_rep=np.array([[1.0], [0.0]]),
        t=1.0,
        _weights_cache=InteractionWeights(weights=W, t=1.0),
    )
    ds = Dataset(values=[[0.0], [1.0]], feature_names=["f"])
    report = mls(ds, model)
    assert abs(report.scores[0] - 2.0 * math.exp(-1.0) * math.log(2.0)) < 1e-12


def test_mls_constant_feature_scores_inf(rng):
    X = np.column_stack([rng.standard_normal(20), np.zeros(20)])
    ds = Dataset(values=X, feature_names=["f", "c"])
    model = build_margin_model(ds, MarginConfig(quantile=0.1))
    report = mls(ds, model)
    assert np.isinf(report.scores[1])
    assert report.constant_feature_flags.tolist() == [False, True]


def test_mls_all_constant_rejected():
    ds = Dataset(values=np.zeros((6, 2)), feature_names=["a", "b"])
    model = build_margin_model(ds, MarginConfig())
    with pytest.raises(DataError, match="all features are constant"):
        mls(ds, model)


def test_mls_no_margin_weight_warns(rng):
    ds = Dataset(
        values=rng.standard_normal((20, 3)),
        feature_names=["a", "b", "c"],
    )
    model = build_margin_model(ds, MarginConfig(quantile=0.1, k=10))
    assert not model.u.any()
    report = mls(ds, model)
    assert np.array_equal(report.scores, np.zeros(3))
    assert any("no sample carries margin weight" in w for w in report.warnings)


def test_mls_scale_invariant_with_fixed_kernel(rng):
    rep = rng.standard_normal((12, 3)) * rng.integers(0, 2, (12, 3))
    counts = (rep != 0).sum(axis=1)
    weights = InteractionWeights(
        weights=np.exp(-np.abs(rep[:, None, :] - rep[None, :, :]).sum(axis=2)), t=1.0
    )
    u = np.where(counts > 0, np.log(counts + 1.0), 0.0)
    f = rng.standard_normal(12)
    base = mls_naive(f, weights, u)
    for a in (0.01, 3.0, -7.5):
        assert abs(mls_naive(a * f, weights, u) - base) <= 1e-9 * max(1.0, abs(base))


def test_mls_row_permutation_invariant(rng):
    X = rng.standard_normal((18, 4))
    names = [f"f{j}" for j in range(4)]
    perm = rng.permutation(18)
    a = Dataset(values=X, feature_names=names)
    b = Dataset(values=X[perm], feature_names=names)
    config = MarginConfig(quantile=0.15)
    sa = mls(a, build_margin_model(a, config)).scores
    sb = mls(b, build_margin_model(b, config)).scores
    assert np.max(np.abs(sa - sb)) <= 1e-12 * np.maximum(1.0, np.abs(sa)).max()
    la = laplacian_score(a).scores
    lb = laplacian_score(b).scores
    assert np.max(np.abs(la - lb)) <= 1e-12


# ------------------------------------------------------------- select_top


def test_select_top_ascending_for_scores():
    report = _report([3.0, 1.0, 2.0])
    assert select_top(report, 2) == [1, 2]


def test_select_top_descending_for_gate_methods():
    report = _report([0.1, 0.9, 0.5], method="dufs")
    assert select_top(report, 2) == [1, 2]
    report = _report([0.1, 0.9, 0.5], method="dufs-mls")
    assert select_top(report, 1) == [1]


def test_select_top_ties_break_to_lowest_index():
    report = _report([2.0, 1.0, 1.0])
    assert select_top(report, 2) == [1, 2]
    report = _report([1.0, 1.0, 0.0])
    assert select_top(report, 3) == [2, 0, 1]


def test_select_top_bounds_checked():
    report = _report([1.0, 2.0])
    with pytest.raises(ValueError, match="num_features"):
        select_top(report, 0)
    with pytest.raises(ValueError, match="num_features"):
        select_top(report, 3)


def test_select_top_all_constant_warns():
    report = _report([np.inf, np.inf], constant=[True, True])
    assert select_top(report, 1) == [0]
    assert any("selection is arbitrary" in w for w in report.warnings)


def test_ranked_rows_full_ordering():
    report = _report([3.0, 1.0, 2.0])
    rows = ranked_rows(report)
    assert rows == [("f1", 1.0, 1), ("f2", 2.0, 2), ("f0", 3.0, 3)]


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=12), st.data())
def test_select_top_returns_best_prefix(scores, data):
    report = _report(scores)
    k = data.draw(st.integers(1, len(scores)))
    picked = select_top(report, k)
    assert len(picked) == k
    assert len(set(picked)) == k
    worst_picked = max(report.scores[i] for i in picked)
    rest = [report.scores[i] for i in range(len(scores)) if i not in picked]
    assert all(worst_picked <= r for r in rest)
