"""Dataset ingestion, scaling, splitting, partitioning, and synthesis.

Datasets are immutable values: features + binary anomaly labels (1 =
anomaly), with the raw source class retained when one exists so the
class-grouped partitioner can use it. Partitioning produces a
PartitionPlan of per-split index lists, serializable to CSV for exact
replay.
"""
import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .util import largest_remainder

# shapes of the widely used public benchmarks, keyed by a filename hint:
# (rows, anomalies, feature dims). Used as a sanity warning on load.
KNOWN_DATASET_SHAPES = {
    "shuttle": (49097, 3511, 9),
    "covertype": (581012, 2747, 10),
    "creditcard": (284807, 492, 29),
}

PARTITION_SCHEMES = ("even", "noniid_kmeans", "random")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    name: str
    classes: np.ndarray | None = None  # raw source class per sample, if any

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ConfigError("features must be a 2-d matrix")
        if labels.shape != (features.shape[0],):
            raise ConfigError("one label per sample required")
        if not np.all((labels == 0) | (labels == 1)):
            raise ConfigError("labels must be binary (1 = anomaly)")
        if len(self.feature_names) != features.shape[1]:
            raise ConfigError("one name per feature column required")
        if self.classes is not None:
            classes = np.asarray(self.classes, dtype=object)
            object.__setattr__(self, "classes", classes)
            if len(classes) != features.shape[0]:
                raise ConfigError("one class per sample required")

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_anomalies(self) -> int:
        return int(self.labels.sum())

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[indices], self.labels[indices], self.feature_names,
            self.name, None if self.classes is None else self.classes[indices])


def load_csv(path, label_column: str, positive_label: str) -> Dataset:
    """Read a headered numeric CSV; label_column equal to positive_label
    marks the anomaly class. Parse failures report row and column."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ConfigError(f"{path}: label column {label_column!r} not in "
                              f"header {header}")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        rows, labels, classes = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}: row {row_no} has {len(row)} cells, "
                                  f"expected {len(header)}")
            raw_label = row[label_idx].strip()
            classes.append(raw_label)
            labels.append(1 if raw_label == positive_label else 0)
            values = []
            for col_idx, cell in enumerate(row):
                if col_idx == label_idx:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ConfigError(
                        f"{path}: row {row_no}, column "
                        f"{header[col_idx]!r}: non-numeric cell {cell!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    ds = Dataset(np.array(rows), np.array(labels), feature_names,
                 path.stem, classes=np.array(classes))
    for hint, (n, n_anom, dim) in KNOWN_DATASET_SHAPES.items():
        if hint in path.stem.lower():
            got = (ds.num_samples, ds.num_anomalies, ds.num_features)
            if got != (n, n_anom, dim):
                warnings.warn(f"{path.name}: shape {got} differs from the "
                              f"published {(n, n_anom, dim)}")
    return ds


@dataclass(frozen=True)
class Scaler:
    """Per-feature affine map (x - offset) / scale; constant features
    (scale 0) map to 0 and invert back to their offset."""

    method: str
    offset: np.ndarray
    scale: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        safe = np.where(self.scale == 0.0, 1.0, self.scale)
        out = (features - self.offset) / safe
        out[:, self.scale == 0.0] = 0.0
        return out

    def inverse_transform(self, features: np.ndarray) -> np.ndarray:
        return features * self.scale + self.offset


def fit_scaler(features: np.ndarray, method: str = "minmax") -> Scaler:
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        raise ConfigError("cannot fit a scaler on no data")
    if method == "minmax":
        lo = features.min(axis=0)
        return Scaler(method, lo, features.max(axis=0) - lo)
    if method == "zscore":
        return Scaler(method, features.mean(axis=0), features.std(axis=0))
    raise ConfigError(f"unknown scaling method {method!r}")


def apply_scaler(dataset: Dataset, scaler: Scaler) -> Dataset:
    return replace(dataset, features=scaler.transform(dataset.features))


def scale(dataset: Dataset, method: str, fit_on) -> Dataset:
    """Fit on the rows indexed by fit_on (the training split), apply to all."""
    fit_on = np.asarray(fit_on, dtype=np.int64)
    if fit_on.size == 0:
        raise ConfigError("fit indices are empty")
    return apply_scaler(dataset, fit_scaler(dataset.features[fit_on], method))


def split(dataset: Dataset, train_frac: float, val_frac: float, seed: int):
    """Stratified train/val/test split; training keeps only normal samples.

    Normals are apportioned by (train, val, test) fractions; anomalies by
    (val, test) only, at least one each. Deterministic under seed.
    """
    if not (train_frac > 0 and val_frac > 0 and train_frac + val_frac < 1):
        raise ConfigError(f"bad fractions train={train_frac}, val={val_frac}; "
                          "need positive values with a test remainder")
    test_frac = 1.0 - train_frac - val_frac
    rng = np.random.default_rng(seed)
    normal_idx = rng.permutation(np.where(dataset.labels == 0)[0])
    anomaly_idx = rng.permutation(np.where(dataset.labels == 1)[0])
    if anomaly_idx.size < 2:
        raise ConfigError(f"{anomaly_idx.size} anomalies cannot populate both "
                          "val and test")
    n_counts = largest_remainder(
        np.array([train_frac, val_frac, test_frac]), normal_idx.size)
    a_counts = largest_remainder(
        np.array([val_frac, test_frac]), anomaly_idx.size)
    for j in range(2):  # both eval splits need at least one anomaly
        if a_counts[j] == 0:
            a_counts[j], a_counts[1 - j] = 1, a_counts[1 - j] - 1
    train_n, val_n, test_n = np.split(normal_idx, np.cumsum(n_counts)[:-1])
    val_a, test_a = np.split(anomaly_idx, [a_counts[0]])
    return (dataset.take(train_n),
            dataset.take(np.concatenate([val_n, val_a])),
            dataset.take(np.concatenate([test_n, test_a])))


@dataclass(frozen=True)
class PartitionPlan:
    """Per-split client index lists; indices address that split's dataset."""

    scheme: str
    assignments: dict  # split name -> list of per-client index arrays
    seed: int

    @property
    def num_clients(self) -> int:
        return len(next(iter(self.assignments.values())))

    def client_indices(self, split_name: str, client_id: int) -> np.ndarray:
        return self.assignments[split_name][client_id]


def _check_conservation(assignments, split_sizes):
    for name, per_client in assignments.items():
        joined = np.concatenate([np.asarray(a) for a in per_client]) \
            if per_client else np.empty(0, dtype=np.int64)
        if joined.size != split_sizes[name] or \
                np.unique(joined).size != joined.size:
            raise ConfigError(f"partition does not cover split {name!r} exactly")


def _deal(indices: np.ndarray, num_clients: int):
    return [indices[i::num_clients] for i in range(num_clients)]


def partition_even(split_datasets, num_clients: int, seed: int) -> PartitionPlan:
    """Shuffled round-robin deal, anomalies first so both the client sizes
    and the per-client anomaly counts differ by at most one."""
    if num_clients < 1:
        raise ConfigError(f"num_clients must be >= 1, got {num_clients}")
    train, val, test = split_datasets
    rng = np.random.default_rng(seed)
    assignments = {}
    for name, ds in (("train", train), ("val", val), ("test", test)):
        anom = rng.permutation(np.where(ds.labels == 1)[0])
        norm = rng.permutation(np.where(ds.labels == 0)[0])
        if name != "train" and anom.size < num_clients:
            warnings.warn(f"{name} split: {anom.size} anomalies across "
                          f"{num_clients} clients; some clients hold none")
        assignments[name] = _deal(np.concatenate([anom, norm]), num_clients)
    _check_conservation(assignments, {"train": train.num_samples,
                                      "val": val.num_samples,
                                      "test": test.num_samples})
    return PartitionPlan("even", assignments, seed)


def kmeans(points: np.ndarray, k: int, seed: int, max_iters: int = 100) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns the assignment.

    Deterministic under seed. Empty clusters are re-seeded with the
    farthest point of the largest cluster, which is force-reassigned.
    Within-cluster sum of squares is asserted non-increasing.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= {n}, got k={k}")
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total > 0.0:
            pick = rng.choice(n, p=closest / total)
        else:
            pick = int(rng.integers(n))
        centroids[j] = points[pick]
        closest = np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1))

    prev_assign = None
    prev_wcss = np.inf
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for j in range(k):
            if not np.any(assign == j):
                sizes = np.bincount(assign, minlength=k)
                donor = int(sizes.argmax())
                members = np.where(assign == donor)[0]
                far = members[int(d2[members, donor].argmax())]
                centroids[j] = points[far]
                assign[far] = j
        for j in range(k):
            centroids[j] = points[assign == j].mean(axis=0)
        wcss = float(((points - centroids[assign]) ** 2).sum())
        assert wcss <= prev_wcss * (1.0 + 1e-9) + 1e-12, \
            f"within-cluster SS increased: {prev_wcss} -> {wcss}"
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign.copy()
        prev_wcss = wcss
    return assign


def _ensure_each_has(per_client, eligible, what: str):
    """Give every client at least one eligible index, stealing the last
    eligible index from the client holding the most."""
    num_clients = len(per_client)

    def eligible_count(c):
        return sum(1 for i in per_client[c] if eligible[i])

    for cid in range(num_clients):
        if eligible_count(cid) == 0:
            donor = max(range(num_clients), key=eligible_count)
            if eligible_count(donor) < 2:
                raise ConfigError(f"cannot give every client one {what}")
            pos = max(p for p, i in enumerate(per_client[donor]) if eligible[i])
            per_client[cid].append(per_client[donor].pop(pos))


def partition_noniid(split_datasets, num_clients: int = 6, k: int | None = None,
                     seed: int = 0) -> PartitionPlan:
    """Cluster-skewed partition.

    Sources with multiple normal classes: classes are grouped per client
    (round-robin over sorted class values) and anomalies are k-means
    clustered (k clusters dealt round-robin to clients). Binary sources:
    k-means over all features assigns whole clusters to clients. Clients
    left without train or val samples take one from the largest client.
    """
    if num_clients < 2:
        raise ConfigError(f"num_clients must be >= 2, got {num_clients}")
    train, val, test = split_datasets
    if k is None:
        k = num_clients
    datasets = {"train": train, "val": val, "test": test}
    normal_classes = None
    if train.classes is not None:
        normal_classes = np.unique(np.concatenate([
            np.asarray(ds.classes)[ds.labels == 0]
            for ds in datasets.values() if ds.classes is not None]))
    assignments = {name: [[] for _ in range(num_clients)] for name in datasets}

    if normal_classes is not None and normal_classes.size >= 2:
        class_client = {c: i % num_clients for i, c in enumerate(normal_classes)}
        for name, ds in datasets.items():
            for idx in np.where(ds.labels == 0)[0]:
                assignments[name][class_client[ds.classes[idx]]].append(idx)
        anom_features = [ds.features[ds.labels == 1] for ds in (val, test)]
        pooled = np.vstack(anom_features)
        if k > pooled.shape[0]:
            warnings.warn(f"k={k} exceeds the {pooled.shape[0]} anomalies; "
                          f"reduced to {pooled.shape[0]}")
            k = pooled.shape[0]
        clusters = kmeans(pooled, k, seed)
        offsets = {"val": 0, "test": anom_features[0].shape[0]}
        for name in ("val", "test"):
            ds = datasets[name]
            for pos, idx in enumerate(np.where(ds.labels == 1)[0]):
                cluster = clusters[offsets[name] + pos]
                assignments[name][cluster % num_clients].append(idx)
    else:
        pooled = np.vstack([datasets[name].features
                            for name in ("train", "val", "test")])
        clusters = kmeans(pooled, num_clients, seed)
        offset = 0
        for name in ("train", "val", "test"):
            ds = datasets[name]
            for idx in range(ds.num_samples):
                assignments[name][clusters[offset + idx]].append(idx)
            offset += ds.num_samples

    # training and the summary protocol need a floor: one train sample and
    # one normal val sample per client; evaluation needs a non-empty test
    _ensure_each_has(assignments["train"], np.ones(train.num_samples, bool),
                     "train sample")
    _ensure_each_has(assignments["val"], val.labels == 0, "normal val sample")
    _ensure_each_has(assignments["test"], np.ones(test.num_samples, bool),
                     "test sample")
    final = {name: [np.array(sorted(a), dtype=np.int64) for a in per_client]
             for name, per_client in assignments.items()}
    _check_conservation(final, {n: d.num_samples for n, d in datasets.items()})
    return PartitionPlan("noniid_kmeans", final, seed)


def partition_random(split_datasets, num_clients: int, seed: int,
                     concentration: float = 0.5) -> PartitionPlan:
    """Dirichlet-proportioned uneven partition; low concentration = extreme
    skew. Normals and anomalies follow the same client proportions; every
    client keeps at least one train and one val-normal sample."""
    if num_clients < 2:
        raise ConfigError(f"num_clients must be >= 2, got {num_clients}")
    if not concentration > 0:
        raise ConfigError(f"concentration must be positive, got {concentration}")
    train, val, test = split_datasets
    rng = np.random.default_rng(seed)
    proportions = rng.dirichlet(np.full(num_clients, concentration))

    def apportion(total, need_one_each):
        if not need_one_each:
            return largest_remainder(proportions, total)
        # reserve one per client up front, apportion only the remainder
        if total < num_clients:
            raise ConfigError(f"{total} samples cannot give every one of "
                              f"{num_clients} clients at least one")
        return 1 + largest_remainder(proportions, total - num_clients)

    assignments = {}
    for name, ds in (("train", train), ("val", val), ("test", test)):
        norm = rng.permutation(np.where(ds.labels == 0)[0])
        anom = rng.permutation(np.where(ds.labels == 1)[0])
        need_one = name in ("train", "val")
        n_counts = apportion(norm.size, need_one)
        a_counts = largest_remainder(proportions, anom.size) if anom.size \
            else np.zeros(num_clients, dtype=np.int64)
        per_client = []
        n_bounds = np.concatenate([[0], np.cumsum(n_counts)])
        a_bounds = np.concatenate([[0], np.cumsum(a_counts)])
        for c in range(num_clients):
            per_client.append(np.concatenate([
                norm[n_bounds[c]:n_bounds[c + 1]],
                anom[a_bounds[c]:a_bounds[c + 1]]]))
        assignments[name] = per_client
    _check_conservation(assignments, {"train": train.num_samples,
                                      "val": val.num_samples,
                                      "test": test.num_samples})
    return PartitionPlan("random", assignments, seed)


def write_plan(plan: PartitionPlan, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# scheme={plan.scheme} seed={plan.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(["split", "client_id", "sample_index"])
        for split_name in sorted(plan.assignments):
            for client_id, indices in enumerate(plan.assignments[split_name]):
                for idx in indices:
                    writer.writerow([split_name, client_id, int(idx)])


def read_plan(path) -> PartitionPlan:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# scheme="):
            raise ConfigError(f"{path}: missing plan header")
        meta = dict(part.split("=") for part in first[2:].split())
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["split", "client_id", "sample_index"]:
            raise ConfigError(f"{path}: unexpected columns {header}")
        raw = {}
        max_client = -1
        for split_name, client_id, idx in reader:
            raw.setdefault(split_name, {}).setdefault(int(client_id), []) \
                .append(int(idx))
            max_client = max(max_client, int(client_id))
    # file order is meaningful: it fixes each client's local sample order
    assignments = {
        name: [np.array(clients.get(c, []), dtype=np.int64)
               for c in range(max_client + 1)]
        for name, clients in raw.items()}
    return PartitionPlan(meta["scheme"], assignments, int(meta["seed"]))


@dataclass(frozen=True)
class CorruptionSpec:
    corrupt_client_ids: frozenset
    noise_sigma_scale: float

    def __post_init__(self):
        object.__setattr__(self, "corrupt_client_ids",
                           frozenset(self.corrupt_client_ids))
        if self.noise_sigma_scale < 0:
            raise ConfigError("noise_sigma_scale must be >= 0")


def corrupt(client_state, spec: CorruptionSpec, seed: int):
    """Gaussian-noise a corrupt client's validation features.

    Noise std per feature is noise_sigma_scale times that feature's std in
    the client's own training data, so constant features stay untouched.
    Labels, train, and test data are never modified; clients not listed
    come back unchanged.
    """
    if client_state.client_id not in spec.corrupt_client_ids or \
            spec.noise_sigma_scale == 0.0:
        return client_state
    rng = np.random.default_rng(np.random.SeedSequence(
        [seed, client_state.client_id]))
    feature_std = client_state.train_data.std(axis=0)
    noise = rng.standard_normal(client_state.val_data.shape) * \
        (spec.noise_sigma_scale * feature_std)
    return replace(client_state, val_data=client_state.val_data + noise)


def synth(num_normal: int, num_anomaly: int, dim: int, separation: float,
          seed: int) -> Dataset:
    """Gaussian blobs: normal ~ N(0, I), anomaly ~ N(separation * 1, I)."""
    return synth_blobs(num_normal, (num_anomaly,), dim, (separation,), seed)


def synth_blobs(num_normal: int, anomaly_blob_sizes, dim: int, separations,
                seed: int) -> Dataset:
    """Multi-blob variant: anomaly blob b sits at separations[b] * 1."""
    anomaly_blob_sizes = tuple(int(s) for s in anomaly_blob_sizes)
    separations = tuple(float(s) for s in separations)
    if num_normal < 0 or any(s < 0 for s in anomaly_blob_sizes) or dim < 1:
        raise ConfigError("counts must be >= 0 and dim >= 1")
    if len(anomaly_blob_sizes) != len(separations):
        raise ConfigError("one separation per anomaly blob required")
    rng = np.random.default_rng(seed)
    blocks = [rng.standard_normal((num_normal, dim))]
    for size, sep in zip(anomaly_blob_sizes, separations):
        blocks.append(rng.standard_normal((size, dim)) + sep)
    features = np.vstack(blocks)
    labels = np.concatenate([np.zeros(num_normal, dtype=np.int64),
                             np.ones(sum(anomaly_blob_sizes), dtype=np.int64)])
    name = (f"synth(n={num_normal}, a={anomaly_blob_sizes}, dim={dim}, "
            f"sep={separations}, seed={seed})")
    return Dataset(features, labels, tuple(f"f{i}" for i in range(dim)), name)
