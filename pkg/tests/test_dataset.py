import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqfs.classifiers import ModelSpec, predict, train
from seqfs.dataset import (ExpressionMatrix, LabeledDataset, SyntheticSpec, from_label_strings, generate_synthetic,
                           load_tsv, stratified_kfold, stratified_split, tsv_text, write_tsv)
from seqfs.errors import DataError


def _write(tmp_path, text, name="d.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_tsv_encodes_labels_by_first_appearance(tmp_path):
    p = _write(tmp_path, "sample_id\tlabel\tg1\tg2\ns1\tA\t1\t2\ns2\tA\t3\t4\ns3\tB\t5\t6\n")
    ds = load_tsv(p, "label")
    assert ds.class_names == ("A", "B")
    assert ds.labels.tolist() == [0, 0, 1]
    assert ds.feature_ids == ("g1", "g2")
    assert ds.sample_ids == ("s1", "s2", "s3")
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4], [5, 6]])


def test_label_column_may_sit_anywhere(tmp_path):
    p = _write(tmp_path, "sample_id\tg1\ttype\tg2\ns1\t1\tB\t2\ns2\t3\tA\t4\n")
    ds = load_tsv(p, "type")
    assert ds.class_names == ("B", "A")
    assert ds.feature_ids == ("g1", "g2")
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4]])


def test_negative_cell_names_row_and_column(tmp_path):
    p = _write(tmp_path, "sample_id\tlabel\tg1\tg2\ns1\tA\t1\t2\ns2\tB\t-1.0\t4\n")
    with pytest.raises(DataError, match=r"row 3.*'g1'"):
        load_tsv(p, "label")


@pytest.mark.parametrize("body, pattern", [
    ("sample_id\tlabel\tg1\ns1\tA\tx\n", "non-numeric"),
    ("sample_id\tlabel\tg1\ns1\tA\tnan\n", "invalid"),
    ("sample_id\tlabel\tg1\ns1\tA\t\n", "non-numeric"),
    ("sample_id\tlabel\tg1\ns1\tA\t1\t2\n", "fields"),
    ("id\tlabel\tg1\ns1\tA\t1\n", "sample_id"),
    ("sample_id\tlabel\tg1\tg1\ns1\tA\t1\t2\n", "duplicate"),
    ("sample_id\tclass\tg1\ns1\tA\t1\n", "label column"),
    ("sample_id\tlabel\tg1\n", "no samples"),
    ("", "empty"),
])
def test_load_tsv_rejects_malformed_files(tmp_path, body, pattern):
    with pytest.raises(DataError, match=pattern):
        load_tsv(_write(tmp_path, body), "label")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_tsv(tmp_path / "absent.tsv", "label")


def test_duplicate_sample_ids_rejected(tmp_path):
    with pytest.raises(DataError):
        load_tsv(_write(tmp_path, "sample_id\tlabel\tg1\ns1\tA\t1\ns1\tB\t2\n"), "label")


def test_tsv_round_trip(tmp_path):
    ds, _ = generate_synthetic(SyntheticSpec(12, 7, 3, 3, 2.0, 1.0, seed=4))
    p = tmp_path / "x.tsv"
    write_tsv(ds, p)
    back = load_tsv(p, "label")
    np.testing.assert_allclose(back.X, ds.X, rtol=0, atol=1e-12)
    # codes are re-derived by first appearance; the label strings survive
    assert [back.class_names[c] for c in back.labels] == [ds.class_names[c] for c in ds.labels]
    # a second write is byte-identical
    assert tsv_text(back) == p.read_text(encoding="utf-8")


def test_matrix_invariants():
    with pytest.raises(DataError):
        ExpressionMatrix(np.array([[1.0, -0.5]]), ["s"], ["a", "b"])
    with pytest.raises(DataError):
        ExpressionMatrix(np.array([[1.0, np.inf]]), ["s"], ["a", "b"])
    with pytest.raises(DataError):
        ExpressionMatrix(np.ones((2, 2)), ["s", "s"], ["a", "b"])
    with pytest.raises(DataError):
        ExpressionMatrix(np.ones((2, 2)), ["s", "t"], ["a"])
    m = ExpressionMatrix(np.ones((2, 2)), ["s", "t"], ["a", "b"])
    with pytest.raises(ValueError):
        m.values[0, 0] = 3.0


def test_dataset_requires_every_class_present():
    m = ExpressionMatrix(np.ones((2, 1)), ["s", "t"], ["a"])
    with pytest.raises(DataError):
        LabeledDataset(m, np.array([0, 0]), ("A", "B"))
    with pytest.raises(DataError):
        LabeledDataset(m, np.array([0, 2]), ("A", "B"))


def test_with_matrix_drops_emptied_classes():
    m = ExpressionMatrix(np.arange(6.0).reshape(3, 2), ["s1", "s2", "s3"], ["a", "b"])
    ds = from_label_strings(m, ["X", "Y", "Z"])
    sub = ds.with_matrix(m.take_samples([0, 2]))
    assert sub.class_names == ("X", "Z")
    assert sub.labels.tolist() == [0, 1]


# ---------------------------------------------------------------- splits

def _toy(labels):
    labels = np.asarray(labels)
    n = labels.size
    m = ExpressionMatrix(np.arange(n, dtype=float)[:, None], [f"s{i}" for i in range(n)], ["f"])
    return LabeledDataset(m, labels, tuple(f"c{c}" for c in range(labels.max() + 1)))


def test_split_quarter_of_balanced_pairs():
    tr, te = stratified_split(_toy([0, 0, 0, 0, 1, 1, 1, 1]), 0.25, seed=3)
    assert sorted(te.labels.tolist()) == [0, 1]
    assert sorted(tr.labels.tolist()) == [0, 0, 0, 1, 1, 1]


def test_split_is_deterministic():
    ds = _toy([0] * 7 + [1] * 5 + [2] * 9)
    a = stratified_split(ds, 0.3, seed=9)
    b = stratified_split(ds, 0.3, seed=9)
    assert a[1].sample_ids == b[1].sample_ids and a[0].sample_ids == b[0].sample_ids


def test_split_errors():
    with pytest.raises(DataError):
        stratified_split(_toy([0, 1]), 0.5, seed=0)
    with pytest.raises(DataError):
        stratified_split(_toy([0, 0, 1, 1]), 1.0, seed=0)
    with pytest.raises(DataError):
        stratified_split(_toy([0, 0, 1, 1]), 0.0, seed=0)


@given(st.lists(st.integers(2, 12), min_size=2, max_size=4), st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_partitions_and_counts(counts, frac, seed):
    labels = np.repeat(np.arange(len(counts)), counts)
    ds = _toy(labels)
    tr, te = stratified_split(ds, frac, seed)
    assert sorted(tr.sample_ids + te.sample_ids) == sorted(ds.sample_ids)
    assert not set(tr.sample_ids) & set(te.sample_ids)
    names = ds.class_names
    for c, cnt in enumerate(counts):
        expect = min(max(int(round(cnt * frac)), 1), cnt - 1)
        n_test = sum(1 for lab in te.labels if te.class_names[lab] == names[c])
        assert n_test == expect


def test_kfold_examples():
    plan = stratified_kfold([0, 0, 1, 1], 2, seed=0)
    for _, te in plan.folds():
        assert sorted(np.array([0, 0, 1, 1])[te].tolist()) == [0, 1]
    labels = np.array([0, 0, 0, 1, 1, 1])
    for _, te in stratified_kfold(labels, 3, seed=5).folds():
        assert sorted(labels[te].tolist()) == [0, 1]
    with pytest.raises(DataError):
        stratified_kfold([0, 1, 1], 2, seed=0)
    with pytest.raises(DataError):
        stratified_kfold([0, 0, 1, 1], 1, seed=0)


@given(st.lists(st.integers(0, 4), min_size=4, max_size=80), st.integers(2, 5), st.integers(0, 2**63))
def test_kfold_stratification_property(labels, k, seed):
    labels = np.asarray(labels)
    counts = np.bincount(labels)
    if counts[counts > 0].min() < k:
        with pytest.raises(DataError):
            stratified_kfold(labels, k, seed)
        return
    plan = stratified_kfold(labels, k, seed)
    assert set(plan.assignments.tolist()) == set(range(k))
    per = np.zeros((k, counts.size), dtype=int)
    for f in range(k):
        per[f] = np.bincount(labels[plan.assignments == f], minlength=counts.size)
    assert (per.max(axis=0) - per.min(axis=0) <= 1).all()
    again = stratified_kfold(labels, k, seed)
    np.testing.assert_array_equal(plan.assignments, again.assignments)


# ---------------------------------------------------------------- synthetic

def test_synthetic_shape_and_mask():
    ds, mask = generate_synthetic(SyntheticSpec(120, 500, 20, 4, 3.0, 1.0, seed=8))
    assert ds.X.shape == (120, 500)
    assert mask.sum() == 20
    assert ds.n_classes == 4
    assert (ds.X >= 0).all()


def test_synthetic_all_informative():
    _, mask = generate_synthetic(SyntheticSpec(20, 6, 6, 2, 3.0, 1.0, seed=1))
    assert mask.all()


def test_synthetic_is_deterministic():
    a, ma = generate_synthetic(SyntheticSpec(30, 40, 5, 3, 2.0, 1.0, seed=17))
    b, mb = generate_synthetic(SyntheticSpec(30, 40, 5, 3, 2.0, 1.0, seed=17))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(ma, mb)
    assert a.labels.tolist() == b.labels.tolist()


@pytest.mark.parametrize("kw", [
    dict(n_samples=10, n_features=5, n_informative=0, n_classes=2),
    dict(n_samples=10, n_features=5, n_informative=6, n_classes=2),
    dict(n_samples=10, n_features=5, n_informative=2, n_classes=1),
    dict(n_samples=3, n_features=5, n_informative=2, n_classes=2),
    dict(n_samples=10, n_features=5, n_informative=2, n_classes=2, class_separation=0.0),
    dict(n_samples=10, n_features=5, n_informative=2, n_classes=2, noise_std=-1.0),
])
def test_synthetic_spec_validation(kw):
    with pytest.raises(DataError):
        SyntheticSpec(**kw)


def test_informative_columns_carry_class_signal():
    ds, mask = generate_synthetic(SyntheticSpec(200, 60, 10, 3, 3.0, 1.0, seed=2))
    means = np.array([ds.X[ds.labels == c].mean(axis=0) for c in range(3)])
    spread = means.max(axis=0) - means.min(axis=0)
    # each informative column separates some pair by about sep; noise columns do not
    assert spread[mask].min() > 2.0
    assert spread[~mask].max() < 1.0


def test_svc_on_informative_columns_of_well_separated_blobs():
    ds, mask = generate_synthetic(SyntheticSpec(200, 100, 10, 3, 5.0, 1.0, seed=21))
    ds = ds.take_features(np.flatnonzero(mask))
    tr, te = stratified_split(ds, 0.3, seed=4)
    model = train(ModelSpec("linear_svc"), tr)
    assert np.mean(predict(model, te.X) == te.labels) >= 0.95
