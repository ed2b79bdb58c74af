import numpy as np
import pytest

from fedthresh.data import (CorruptionSpec, Dataset, corrupt, fit_scaler,
                            apply_scaler, kmeans, load_csv, partition_even,
                            partition_noniid, partition_random, read_plan,
                            scale, split, synth, synth_blobs, write_plan)
from fedthresh.errors import ConfigError
from fedthresh.federation import ClientState


def toy_dataset(num_normal=100, num_anomaly=10, dim=3, seed=0):
    return synth(num_normal, num_anomaly, dim, separation=5.0, seed=seed)


# ---- load_csv ----

def test_load_csv_roundtrip(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b,label\n1.5,2.0,normal\n3.0,4.5,attack\n"
                    "0.0,-1.0,normal\n")
    ds = load_csv(path, label_column="label", positive_label="attack")
    assert ds.num_samples == 3 and ds.num_features == 2
    assert np.array_equal(ds.labels, [0, 1, 0])
    assert np.array_equal(ds.features,
                          [[1.5, 2.0], [3.0, 4.5], [0.0, -1.0]])
    assert ds.feature_names == ("a", "b")


def test_load_csv_missing_label_column(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError, match="label"):
        load_csv(path, label_column="label", positive_label="x")


def test_load_csv_nonnumeric_cell_names_row_and_column(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b,label\n1.0,oops,normal\n")
    with pytest.raises(ConfigError, match=r"row 2.*'b'"):
        load_csv(path, label_column="label", positive_label="x")


# ---- scaling ----

def test_minmax_scaler_maps_train_range():
    train = np.array([[2.0], [4.0]])
    scaler = fit_scaler(train, "minmax")
    assert scaler.transform(np.array([[3.0]]))[0, 0] == pytest.approx(0.5)
    # values outside the fit range stay unclamped
    assert scaler.transform(np.array([[5.0]]))[0, 0] == pytest.approx(1.5)


def test_scaler_constant_feature_zeroed():
    train = np.column_stack([np.arange(4.0), np.full(4, 7.0)])
    for method in ("minmax", "zscore"):
        scaler = fit_scaler(train, method)
        out = scaler.transform(train)
        assert np.all(out[:, 1] == 0.0)
        assert np.all(np.isfinite(out))


def test_zscore_scaler_moments(rng):
    train = rng.normal(3.0, 2.0, size=(500, 2))
    out = fit_scaler(train, "zscore").transform(train)
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(out.std(axis=0), 1.0, atol=1e-12)


def test_scale_inverse_roundtrip(rng):
    features = rng.normal(size=(50, 4)) * np.array([1.0, 10.0, 0.1, 3.0])
    scaler = fit_scaler(features, "minmax")
    back = scaler.inverse_transform(scaler.transform(features))
    assert np.allclose(back, features, rtol=1e-9)


def test_scale_operation_fits_on_train_only():
    ds = toy_dataset()
    fit_idx = np.arange(10)
    scaled = scale(ds, "minmax", fit_on=fit_idx)
    fit_block = ds.features[fit_idx]
    expected_min = fit_block.min(axis=0)
    got = scaled.features * (fit_block.max(axis=0) - expected_min) + expected_min
    assert np.allclose(got, ds.features, rtol=1e-9)


# ---- split ----

def test_split_stratified_counts():
    ds = toy_dataset(100, 10)
    train, val, test = split(ds, 0.6, 0.2, seed=3)
    assert train.num_samples == 60 and train.num_anomalies == 0
    assert val.num_samples == 25 and val.num_anomalies == 5
    assert test.num_samples == 25 and test.num_anomalies == 5


def test_split_deterministic_and_disjoint():
    ds = toy_dataset(80, 8)
    a = split(ds, 0.5, 0.25, seed=9)
    b = split(ds, 0.5, 0.25, seed=9)
    for da, db in zip(a, b):
        assert np.array_equal(da.features, db.features)
    total = sum(d.num_samples for d in a)
    assert total == ds.num_samples


def test_split_rejects_too_few_anomalies():
    ds = toy_dataset(50, 0)
    with pytest.raises(ConfigError):
        split(ds, 0.6, 0.2, seed=0)
    ds1 = toy_dataset(50, 1)
    with pytest.raises(ConfigError):
        split(ds1, 0.6, 0.2, seed=0)


def test_split_rejects_bad_fractions():
    ds = toy_dataset()
    with pytest.raises(ConfigError):
        split(ds, 0.8, 0.3, seed=0)
    with pytest.raises(ConfigError):
        split(ds, 0.0, 0.5, seed=0)


# ---- partition_even ----

def test_partition_even_sizes():
    ds = toy_dataset(94, 6)
    splits = split(ds, 0.6, 0.2, seed=1)
    plan = partition_even(splits, 3, seed=2)
    for split_name, d in zip(("train", "val", "test"), splits):
        sizes = [len(plan.client_indices(split_name, c)) for c in range(3)]
        assert sum(sizes) == d.num_samples
        assert max(sizes) - min(sizes) <= 1
        all_idx = np.concatenate(
            [plan.client_indices(split_name, c) for c in range(3)])
        assert len(np.unique(all_idx)) == len(all_idx)


def test_partition_even_stratifies_anomalies():
    ds = toy_dataset(94, 12)
    splits = split(ds, 0.6, 0.2, seed=1)
    plan = partition_even(splits, 3, seed=5)
    val = splits[1]
    per_client = [int(val.labels[plan.client_indices("val", c)].sum())
                  for c in range(3)]
    assert max(per_client) - min(per_client) <= 1
    assert sum(per_client) == val.num_anomalies


def test_partition_even_warns_with_more_clients_than_anomalies():
    ds = toy_dataset(200, 4)
    splits = split(ds, 0.6, 0.2, seed=1)
    with pytest.warns(UserWarning):
        partition_even(splits, 5, seed=0)


# ---- kmeans ----

def test_kmeans_separated_pair():
    points = np.array([[0.0], [10.0]])
    assign = kmeans(points, 2, seed=0)
    assert assign[0] != assign[1]


def test_kmeans_k1_single_cluster(rng):
    points = rng.normal(size=(20, 2))
    assert np.all(kmeans(points, 1, seed=0) == 0)


def test_kmeans_collinear_points():
    points = np.array([[0.0], [1.0], [10.0]])
    assign = kmeans(points, 2, seed=4)
    assert assign[0] == assign[1] != assign[2]


def test_kmeans_identical_points_reseed_rule():
    points = np.zeros((7, 2))
    assign = kmeans(points, 3, seed=0)
    sizes = sorted(np.bincount(assign, minlength=3))
    assert sizes == [1, 1, 5]


def test_kmeans_deterministic(rng):
    points = rng.normal(size=(60, 3))
    a = kmeans(points, 4, seed=11)
    b = kmeans(points, 4, seed=11)
    assert np.array_equal(a, b)


def test_kmeans_recovers_separated_blobs(rng):
    blob_a = rng.normal(0.0, 0.3, size=(40, 2))
    blob_b = rng.normal(8.0, 0.3, size=(25, 2))
    points = np.vstack([blob_a, blob_b])
    assign = kmeans(points, 2, seed=1)
    # purity: each blob lands in exactly one cluster
    assert len(set(assign[:40])) == 1
    assert len(set(assign[40:])) == 1
    assert assign[0] != assign[-1]


# ---- partition_noniid ----

def blob_splits(rng_seed=0):
    ds = synth_blobs(600, (40, 40), dim=4, separations=(4.0, 9.0),
                     seed=rng_seed)
    return split(ds, 0.6, 0.2, seed=1)


def test_partition_noniid_binary_clusters_and_floors():
    splits = blob_splits()
    plan = partition_noniid(splits, num_clients=3, seed=2)
    for split_name, d in zip(("train", "val", "test"), splits):
        all_idx = np.concatenate(
            [plan.client_indices(split_name, c) for c in range(3)])
        assert sorted(all_idx) == list(range(d.num_samples))
    val = splits[1]
    for c in range(3):
        idx = plan.client_indices("val", c)
        assert len(idx) >= 1
        assert np.any(val.labels[idx] == 0)  # summary floor: a normal each
        assert len(plan.client_indices("train", c)) >= 1
        assert len(plan.client_indices("test", c)) >= 1


def test_partition_noniid_separated_anomaly_blobs_stay_together():
    ds = synth_blobs(400, (30, 30), dim=3, separations=(5.0, 30.0), seed=3)
    splits = split(ds, 0.6, 0.2, seed=4)
    plan = partition_noniid(splits, num_clients=2, seed=5)
    val, test = splits[1], splits[2]
    # the far blob sits at 30 sigma: whichever client holds one far-blob
    # anomaly holds them all (cluster purity on well-separated blobs)
    for d, split_name in ((val, "val"), (test, "test")):
        far = set(np.where((d.labels == 1) &
                           (d.features.mean(axis=1) > 15.0))[0])
        owners = {c for c in range(2)
                  if far & set(plan.client_indices(split_name, c).tolist())}
        assert len(owners) == 1


def test_partition_noniid_multiclass_round_robin():
    rng = np.random.default_rng(0)
    features = rng.normal(size=(120, 3))
    labels = np.zeros(120, dtype=np.int64)
    labels[110:] = 1
    classes = tuple(str(i % 4) if i < 110 else "anom" for i in range(120))
    ds = Dataset(features=features, labels=labels, feature_names=("a", "b", "c"),
                 name="multi", classes=classes)
    splits = split(ds, 0.5, 0.25, seed=6)
    plan = partition_noniid(splits, num_clients=2, seed=7)
    train = splits[0]
    train_classes = np.asarray(train.classes)
    c0 = set(train_classes[plan.client_indices("train", 0)])
    c1 = set(train_classes[plan.client_indices("train", 1)])
    # normal classes are dealt to clients as whole groups
    assert c0.isdisjoint(c1)
    assert c0 | c1 == {"0", "1", "2", "3"}


# ---- partition_random ----

def test_partition_random_conserves_and_floors():
    splits = blob_splits()
    plan = partition_random(splits, num_clients=5, seed=8, concentration=0.1)
    for split_name, d in zip(("train", "val", "test"), splits):
        all_idx = np.concatenate(
            [plan.client_indices(split_name, c) for c in range(5)])
        assert sorted(all_idx) == list(range(d.num_samples))
    for c in range(5):
        assert len(plan.client_indices("train", c)) >= 1
        assert len(plan.client_indices("val", c)) >= 1


def test_partition_random_high_concentration_is_near_even():
    splits = blob_splits()
    plan = partition_random(splits, num_clients=4, seed=9,
                            concentration=1e6)
    sizes = [len(plan.client_indices("train", c)) for c in range(4)]
    assert max(sizes) - min(sizes) <= 2


def test_partition_random_uneven_at_low_concentration():
    splits = blob_splits()
    plan = partition_random(splits, num_clients=4, seed=10,
                            concentration=0.05)
    sizes = [len(plan.client_indices("train", c)) for c in range(4)]
    assert max(sizes) - min(sizes) >= 10  # visibly skewed


def test_partition_random_two_by_two():
    rng = np.random.default_rng(0)
    features = rng.normal(size=(8, 2))
    labels = np.array([0, 0, 0, 0, 0, 0, 1, 1], dtype=np.int64)
    ds = Dataset(features=features, labels=labels, feature_names=("a", "b"),
                 name="tiny")
    splits = split(ds, 0.34, 0.33, seed=0)
    plan = partition_random(splits, num_clients=2, seed=1, concentration=0.2)
    train_sizes = [len(plan.client_indices("train", c)) for c in range(2)]
    assert min(train_sizes) >= 1


# ---- plan round trip ----

def test_plan_roundtrip(tmp_path):
    splits = blob_splits()
    plan = partition_even(splits, 3, seed=12)
    path = tmp_path / "plan.csv"
    write_plan(plan, path)
    back = read_plan(path)
    assert back.scheme == plan.scheme and back.seed == plan.seed
    for split_name in ("train", "val", "test"):
        for c in range(3):
            assert np.array_equal(back.client_indices(split_name, c),
                                  plan.client_indices(split_name, c))


# ---- corruption ----

def make_client(rng, cid=0):
    return ClientState(
        client_id=cid,
        train_data=rng.normal(size=(30, 3)),
        val_data=rng.normal(size=(20, 3)),
        val_labels=(rng.random(20) < 0.2).astype(np.int64),
        test_data=rng.normal(size=(20, 3)),
        test_labels=(rng.random(20) < 0.2).astype(np.int64))


def test_corrupt_only_listed_clients(rng):
    a, b = make_client(rng, 0), make_client(rng, 1)
    spec = CorruptionSpec(frozenset([1]), noise_sigma_scale=2.0)
    a2 = corrupt(a, spec, seed=0)
    b2 = corrupt(b, spec, seed=0)
    assert a2 is a  # untouched client passes through
    assert not np.array_equal(b2.val_data, b.val_data)
    assert np.array_equal(b2.train_data, b.train_data)
    assert np.array_equal(b2.val_labels, b.val_labels)
    assert np.array_equal(b2.test_data, b.test_data)


def test_corrupt_zero_scale_identity(rng):
    c = make_client(rng)
    spec = CorruptionSpec(frozenset([0]), noise_sigma_scale=0.0)
    assert np.array_equal(corrupt(c, spec, seed=3).val_data, c.val_data)


def test_corrupt_constant_feature_unchanged(rng):
    c = make_client(rng)
    train = c.train_data.copy()
    train[:, 1] = 4.0  # zero train std
    c = ClientState(c.client_id, train, c.val_data, c.val_labels,
                    c.test_data, c.test_labels)
    out = corrupt(c, CorruptionSpec(frozenset([0]), 1.0), seed=4)
    assert np.array_equal(out.val_data[:, 1], c.val_data[:, 1])
    assert not np.array_equal(out.val_data[:, 0], c.val_data[:, 0])


def test_corrupt_per_client_streams_independent(rng):
    a, b = make_client(rng, 0), make_client(rng, 1)
    both = CorruptionSpec(frozenset([0, 1]), 1.0)
    only_b = CorruptionSpec(frozenset([1]), 1.0)
    b_with_both = corrupt(b, both, seed=5)
    b_alone = corrupt(b, only_b, seed=5)
    # corrupting client 0 as well must not change client 1's noise
    assert np.array_equal(b_with_both.val_data, b_alone.val_data)


def test_corruption_spec_validation():
    with pytest.raises(ConfigError):
        CorruptionSpec(frozenset([0]), noise_sigma_scale=-1.0)


# ---- synth ----

def test_synth_shapes_and_determinism():
    a = synth(50, 5, 4, separation=3.0, seed=42)
    b = synth(50, 5, 4, separation=3.0, seed=42)
    assert a.num_samples == 55 and a.num_features == 4
    assert a.num_anomalies == 5
    assert np.array_equal(a.features, b.features)
    normal_mean = a.features[a.labels == 0].mean()
    anomaly_mean = a.features[a.labels == 1].mean()
    assert anomaly_mean - normal_mean > 2.0


def test_synth_normal_only():
    ds = synth(30, 0, 3, separation=2.0, seed=0)
    assert ds.num_anomalies == 0


def test_synth_blobs_labeling():
    ds = synth_blobs(100, (10, 20), dim=3, separations=(3.0, 8.0), seed=1)
    assert ds.num_samples == 130 and ds.num_anomalies == 30
    far = ds.features[110:].mean()
    near = ds.features[100:110].mean()
    assert far > near
