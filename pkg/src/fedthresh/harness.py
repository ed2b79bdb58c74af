"""Config-driven experiment runner.

A scenario is a pure function of its ScenarioConfig: build (or load) a
dataset, scale, split, partition onto clients, FedAvg-train one shared
model, compute every requested threshold method, and score per-client and
pooled F1 on held-out test data. Thresholds are always selected on
validation errors and reported on test errors.

Timing discipline: wall_time_ms covers threshold computation and
aggregation only, never data handling or model training, and timing lives
in timing.csv so results.csv stays byte-reproducible.
"""
import hashlib
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .autoencoder import TrainConfig, mse_per_sample, save_model
from .data import (CorruptionSpec, apply_scaler, corrupt, fit_scaler, load_csv,
                   partition_even, partition_noniid, partition_random, split,
                   synth, synth_blobs, write_plan)
from .error_stats import AGGREGATION_MODES, ClassSummaries, aggregate, summarize
from .errors import ConfigError, InsufficientTail, StageError
from .federation import Channel, ClientState, FedConfig, run_fedavg, \
    write_round_log
from .metrics import (STAT_FEATURE_COLUMNS, Confusion, collect_stat_features,
                      confusion, correlation_matrix, f1, f1_curve)
from .thresholds import (LOCAL_SIMPLE_METHODS, METHOD_TAGS, classify,
                         fed_filtered, fed_minmax, fed_mse_std, kqe,
                         local_minmax, local_simple, our_method, pot)
from .util import derive_seed, max_threads

# methods whose client->server traffic the privacy audit constrains to
# fixed-size summaries and F1 vectors
AUDITED_METHODS = ("our_method", "fed_mse_std", "fed_filtered")

FEDERATED_METHODS = ("our_method", "fed_minmax", "fed_mse_std", "fed_filtered")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run depends on; hashable to bind result rows to it."""

    dataset: dict
    scheme: str = "even"
    num_clients: int = 6
    rounds: int = 5
    local_epochs: int = 1
    learning_rate: float = 0.05
    batch_size: int = 64
    optimizer: str = "sgd"
    client_weighting: str = "by_sample_count"
    hidden_dims: tuple | None = None
    scale_method: str = "minmax"
    train_frac: float = 0.6
    val_frac: float = 0.2
    methods: tuple = METHOD_TAGS
    n_candidates: int = 1000
    aggregation: str = "mean"
    formula_mode: str = "exact_pooled"
    refine: bool = False
    concentration: float = 0.5
    noniid_k: int | None = None
    corrupt_client_ids: tuple = ()
    noise_sigma_scale: float = 2.0
    method_params: dict = field(default_factory=dict)
    data_seed: int = 1
    model_seed: int = 2
    partition_seed: int = 3
    train_seed: int = 4
    corruption_seed: int = 5
    scenario_id: str = ""

    def __post_init__(self):
        if not isinstance(self.dataset, dict) or "kind" not in self.dataset:
            raise ConfigError("dataset must be a mapping with a 'kind' key")
        if self.scheme not in ("even", "noniid_kmeans", "random"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = set(self.methods) - set(METHOD_TAGS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; "
                              f"valid tags: {METHOD_TAGS}")
        if not self.methods:
            raise ConfigError("at least one method required")
        if self.aggregation not in ("mean", "weighted_mean"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.formula_mode not in AGGREGATION_MODES:
            raise ConfigError(f"unknown formula_mode {self.formula_mode!r}")
        if self.n_candidates < 2:
            raise ConfigError("n_candidates must be >= 2")
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if self.hidden_dims is not None:
            object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        object.__setattr__(self, "corrupt_client_ids",
                           tuple(int(c) for c in self.corrupt_client_ids))

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"{path}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        def plain(value):
            if isinstance(value, tuple):
                return [plain(v) for v in value]
            if isinstance(value, dict):
                return {k: plain(v) for k, v in value.items()}
            return value
        return {f.name: plain(getattr(self, f.name)) for f in fields(self)}

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    @property
    def effective_id(self) -> str:
        return self.scenario_id or f"scn-{self.config_hash()}"


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    method: str
    client_id: str  # "global" or a decimal client index
    split: str
    f1: float
    threshold: float
    wall_time_ms: float
    config_hash: str


@dataclass
class MethodResult:
    tag: str
    global_theta: float
    client_thetas: list
    global_ms: float
    client_ms: list


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _take(spec: dict, kind: str, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise ConfigError(f"dataset kind {kind!r} is missing keys {missing}")
    values = [spec.pop(k) for k in keys]
    if spec:
        raise ConfigError(f"dataset kind {kind!r} got unknown keys "
                          f"{sorted(spec)}")
    return values


def _build_dataset(cfg: ScenarioConfig):
    spec = dict(cfg.dataset)
    kind = spec.pop("kind")
    if kind == "synth":
        args = _take(spec, kind, "num_normal", "num_anomaly", "dim",
                     "separation")
        return synth(*args, seed=cfg.data_seed)
    if kind == "blobs":
        args = _take(spec, kind, "num_normal", "anomaly_blob_sizes", "dim",
                     "separations")
        return synth_blobs(*args, seed=cfg.data_seed)
    if kind == "csv":
        return load_csv(*_take(spec, kind, "path", "label_column",
                               "positive_label"))
    raise ConfigError(f"unknown dataset kind {kind!r}")


def _partition(cfg: ScenarioConfig, splits):
    if cfg.scheme == "even":
        return partition_even(splits, cfg.num_clients, cfg.partition_seed)
    if cfg.scheme == "noniid_kmeans":
        return partition_noniid(splits, cfg.num_clients, cfg.noniid_k,
                                cfg.partition_seed)
    return partition_random(splits, cfg.num_clients, cfg.partition_seed,
                            cfg.concentration)


def build_client_states(plan, train_ds, val_ds, test_ds):
    clients = []
    for cid in range(plan.num_clients):
        val_idx = plan.client_indices("val", cid)
        test_idx = plan.client_indices("test", cid)
        clients.append(ClientState(
            client_id=cid,
            train_data=train_ds.features[plan.client_indices("train", cid)],
            val_data=val_ds.features[val_idx],
            val_labels=val_ds.labels[val_idx],
            test_data=test_ds.features[test_idx],
            test_labels=test_ds.labels[test_idx]))
    return clients


def _apply_corruption(cfg: ScenarioConfig, clients, corrupt_ids=None):
    ids = cfg.corrupt_client_ids if corrupt_ids is None else corrupt_ids
    if not ids:
        return clients
    spec = CorruptionSpec(frozenset(int(i) for i in ids),
                          cfg.noise_sigma_scale)
    return [corrupt(c, spec, cfg.corruption_seed) for c in clients]


def _train(cfg: ScenarioConfig, clients, channel, round_log=None):
    fed_cfg = FedConfig(
        rounds=cfg.rounds,
        train_cfg=TrainConfig(local_epochs=cfg.local_epochs,
                              learning_rate=cfg.learning_rate,
                              batch_size=cfg.batch_size, seed=cfg.train_seed,
                              optimizer=cfg.optimizer),
        client_weighting=cfg.client_weighting,
        hidden_dims=cfg.hidden_dims, model_seed=cfg.model_seed)
    return run_fedavg(clients, fed_cfg, channel=channel, round_log=round_log)


def _f1_matrix(val_errors, val_labels, candidates, client_ms, channel, tag):
    """Each client's F1 vector over the candidate grid (its own errors
    never leave it; only the F1 vector is uploaded)."""

    def one(i):
        started = time.perf_counter()
        row = f1_curve(val_errors[i], val_labels[i], candidates)
        client_ms[i] += (time.perf_counter() - started) * 1000.0
        return row

    threads = max_threads()
    indices = range(len(val_errors))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, indices))
    else:
        rows = [one(i) for i in indices]
    if channel is not None:
        for i in indices:
            channel.record("broadcast", "candidates", len(candidates), i,
                           context=tag)
            channel.record("upload", "f1_scores", len(rows[i]), i, context=tag)
    return np.vstack(rows)


def _timed_per_client(fn, items, client_ms):
    out = []
    for i, item in enumerate(items):
        started = time.perf_counter()
        out.append(fn(i, item))
        client_ms[i] += (time.perf_counter() - started) * 1000.0
    return out


def _compute_method(tag, cfg, val_errors, val_labels, channel,
                    artifacts=None) -> MethodResult:
    """Run one threshold method's full client/server choreography."""
    n_clients = len(val_errors)
    params = dict(cfg.method_params.get(tag, {}))
    client_ms = [0.0] * n_clients
    started = time.perf_counter()

    def upload(kind, size, cid):
        if channel is not None:
            channel.record("upload", kind, size, cid, context=tag)

    if tag == "our_method":
        def summarize_client(i, _):
            errs, labels = val_errors[i], val_labels[i]
            normal = summarize(errs[labels == 0])
            anomaly = summarize(errs[labels == 1]) if np.any(labels == 1) \
                else None
            return ClassSummaries(normal, anomaly)

        class_summaries = _timed_per_client(summarize_client,
                                            range(n_clients), client_ms)
        for i, cs in enumerate(class_summaries):
            upload("summary_stats", 5, i)
            if cs.anomaly is not None:
                upload("summary_stats", 5, i)

        def client_eval(candidates):
            return _f1_matrix(val_errors, val_labels, candidates, client_ms,
                              channel, tag)

        theta = our_method(class_summaries, client_eval, cfg.n_candidates,
                           cfg.aggregation, cfg.formula_mode, cfg.refine)
        if artifacts is not None:
            artifacts["class_summaries"] = class_summaries
            artifacts["global_normal"] = aggregate(
                [cs.normal for cs in class_summaries], cfg.formula_mode)
            artifacts["global_anomaly"] = aggregate(
                [cs.anomaly for cs in class_summaries if cs.anomaly],
                cfg.formula_mode)
        thetas = [theta] * n_clients

    elif tag == "fed_minmax":
        spans = _timed_per_client(
            lambda i, _: (float(val_errors[i].min()), float(val_errors[i].max())),
            range(n_clients), client_ms)
        for i in range(n_clients):
            upload("summary_stats", 2, i)
        counts = np.array([len(e) for e in val_errors])

        def client_eval(candidates):
            return _f1_matrix(val_errors, val_labels, candidates, client_ms,
                              channel, tag)

        theta = fed_minmax(min(s[0] for s in spans), max(s[1] for s in spans),
                           cfg.n_candidates, client_eval, cfg.aggregation,
                           client_counts=counts)
        thetas = [theta] * n_clients

    elif tag == "fed_mse_std":
        summaries = _timed_per_client(lambda i, _: summarize(val_errors[i]),
                                      range(n_clients), client_ms)
        for i in range(n_clients):
            upload("summary_stats", 5, i)
        theta = fed_mse_std(summaries)
        thetas = [theta] * n_clients

    elif tag == "fed_filtered":
        local_ts = _timed_per_client(
            lambda i, _: (lambda s: s.mean + np.sqrt(s.variance))(
                summarize(val_errors[i])),
            range(n_clients), client_ms)
        for i in range(n_clients):
            upload("summary_stats", 1, i)
        theta = fed_filtered(local_ts, z_cut=float(params.get("z_cut", 1.5)))
        thetas = [theta] * n_clients

    else:
        # purely local methods: thresholds are computed client-side; only
        # the final scalar reaches the server, for reporting
        def local_theta(i, _):
            errs, labels = val_errors[i], val_labels[i]
            normal_errs = errs[labels == 0]
            if tag == "local_minmax":
                if np.any(labels == 1):
                    return local_minmax(errs, labels, cfg.n_candidates)
                # no anomalies: every threshold scores F1 = 0 locally; the
                # max error at least predicts nothing falsely
                warnings.warn(f"client {i} holds no anomalies; local_minmax "
                              "falls back to max(errors)")
                return float(errs.max())
            if tag == "kqe":
                return kqe(normal_errs, q=float(params.get("q", 0.99)),
                           bandwidth=params.get("bandwidth"))
            if tag == "pot":
                u_q = float(params.get("u_quantile", 0.98))
                try:
                    return pot(normal_errs, u_quantile=u_q,
                               risk=float(params.get("risk", 1e-3)))
                except InsufficientTail:
                    warnings.warn(f"client {i}: thin tail, pot falls back to "
                                  f"the {u_q:.0%} percentile")
                    return local_simple("percentile", normal_errs,
                                        {"p": u_q * 100.0})
            return local_simple(tag, normal_errs, params)

        thetas = _timed_per_client(local_theta, range(n_clients), client_ms)
        for i in range(n_clients):
            upload("local_threshold", 1, i)
        theta = float(np.mean(thetas))

    global_ms = (time.perf_counter() - started) * 1000.0
    return MethodResult(tag, float(theta), [float(t) for t in thetas],
                        global_ms, client_ms)


def _evaluate(cfg, method_results, clients, model):
    """Per-client and pooled test F1 at each method's threshold(s).

    The "global" row pools every client's test confusion at that client's
    deployed threshold (shared for federated methods, per-client for local
    ones); its threshold column carries the shared or mean threshold.
    """
    test_errors = [mse_per_sample(model, c.test_data) for c in clients]
    scenario_id, config_hash = cfg.effective_id, cfg.config_hash()
    rows = []
    for mr in method_results:
        tp = fp = tn = fn = 0
        client_f1 = []
        for i, c in enumerate(clients):
            conf = confusion(c.test_labels,
                             classify(test_errors[i], mr.client_thetas[i]))
            client_f1.append(f1(conf))
            tp, fp = tp + conf.tp, fp + conf.fp
            tn, fn = tn + conf.tn, fn + conf.fn
        rows.append(ResultRow(scenario_id, mr.tag, "global", "test",
                              f1(Confusion(tp, fp, tn, fn)), mr.global_theta,
                              mr.global_ms, config_hash))
        for i in range(len(clients)):
            rows.append(ResultRow(scenario_id, mr.tag, str(i), "test",
                                  client_f1[i], mr.client_thetas[i],
                                  mr.client_ms[i], config_hash))
    return rows


def _prepare_clients(cfg: ScenarioConfig):
    dataset = _stage("load", _build_dataset, cfg)
    splits = _stage("split", split, dataset, cfg.train_frac, cfg.val_frac,
                    derive_seed(cfg.data_seed, 1))
    def _scale(splits):
        scaler = fit_scaler(splits[0].features, cfg.scale_method)
        return tuple(apply_scaler(ds, scaler) for ds in splits)
    splits = _stage("scale", _scale, splits)
    plan = _stage("partition", _partition, cfg, splits)
    clients = _stage("partition", build_client_states, plan, *splits)
    return splits, plan, clients


def train_model(cfg: ScenarioConfig, out_dir=None):
    """Data prep + FedAvg only; optionally saves the model and round log."""
    _, plan, clients = _prepare_clients(cfg)
    clients = _stage("corrupt", _apply_corruption, cfg, clients)
    round_log = []
    model = _stage("train", _train, cfg, clients, Channel(), round_log)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _stage("report", save_model, model, out / "model.txt")
        _stage("report", write_round_log, round_log, out / "fedavg_rounds.csv")
        _stage("report", write_plan, plan, out / "partition_plan.csv")
    return model, round_log


def run_scenario(cfg: ScenarioConfig, out_dir=None, artifacts=None):
    """Execute one scenario; returns its ResultRows.

    Any failure surfaces as StageError naming the stage; nothing is
    written unless every stage succeeded. Pass a dict as `artifacts` to
    receive internals (model, channel, plan, summaries) for auditing.
    """
    _, plan, clients = _prepare_clients(cfg)
    clients = _stage("corrupt", _apply_corruption, cfg, clients)
    channel = Channel()
    round_log = []
    model = _stage("train", _train, cfg, clients, channel, round_log)
    rows = _run_thresholds(cfg, clients, model, channel, artifacts)
    if artifacts is not None:
        artifacts.update(model=model, channel=channel, plan=plan,
                         clients=clients, round_log=round_log)
    if out_dir is not None:
        _stage("report", emit_report, rows, out_dir, cfg=cfg)
        _stage("report", write_round_log, round_log,
               Path(out_dir) / "fedavg_rounds.csv")
        _stage("report", write_plan, plan, Path(out_dir) / "partition_plan.csv")
    return rows


def _run_thresholds(cfg, clients, model, channel, artifacts=None):
    def compute():
        val_errors = [mse_per_sample(model, c.val_data) for c in clients]
        val_labels = [c.val_labels for c in clients]
        return [_compute_method(tag, cfg, val_errors, val_labels, channel,
                                artifacts)
                for tag in cfg.methods]
    method_results = _stage("threshold", compute)
    return _stage("evaluate", _evaluate, cfg, method_results, clients, model)


def audit_channel(channel: Channel, num_clients: int, rounds: int,
                  methods=AUDITED_METHODS):
    """Raise unless the channel traffic matches the privacy contract.

    FedAvg synchronizes exactly twice per client per round. For the
    summary-protocol methods, client uploads are fixed-size statistics
    records (size <= 5) and candidate-length F1 vectors; raw error
    vectors never appear.
    """
    fedavg = channel.count(context="fedavg")
    expected = 2 * num_clients * rounds
    if fedavg != expected:
        raise AssertionError(f"FedAvg exchanged {fedavg} messages, expected "
                             f"2*{num_clients}*{rounds} = {expected}")
    for tag in methods:
        kinds = channel.upload_kinds(context=tag)
        if not kinds <= {"summary_stats", "f1_scores"}:
            raise AssertionError(f"{tag} uploaded {sorted(kinds)}; only "
                                 "summary_stats and f1_scores are allowed")
        if channel.count(kind="raw_errors", context=tag):
            raise AssertionError(f"{tag} leaked raw errors")
        for m in channel.select("upload", kind="summary_stats", context=tag):
            if m.size > 5:
                raise AssertionError(f"{tag} summary payload of size {m.size} "
                                     "is not a fixed-size statistic")


def _write_lines(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_report(rows, out_dir, cfg: ScenarioConfig | None = None,
                dataset_name: str | None = None):
    """Write results.csv, timing.csv, methods_summary.csv, summary_table.txt.

    results.csv carries no timing, so identical configs reproduce it byte
    for byte; wall times go to timing.csv.
    """
    rows = list(rows)
    if not rows:
        raise ConfigError("no rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = ["scenario_id,method,client_id,split,f1,threshold,config_hash"]
    timing = ["scenario_id,method,client_id,wall_time_ms,config_hash"]
    for r in rows:
        results.append(f"{r.scenario_id},{r.method},{r.client_id},{r.split},"
                       f"{r.f1!r},{r.threshold!r},{r.config_hash}")
        timing.append(f"{r.scenario_id},{r.method},{r.client_id},"
                      f"{r.wall_time_ms!r},{r.config_hash}")
    _write_lines(out / "results.csv", results)
    _write_lines(out / "timing.csv", timing)

    global_rows = [r for r in rows if r.client_id == "global"]
    summary = ["method,f1,threshold"]
    for r in global_rows:
        summary.append(f"{r.method},{r.f1!r},{r.threshold!r}")
    _write_lines(out / "methods_summary.csv", summary)

    name = dataset_name or (cfg.dataset.get("path", cfg.dataset["kind"])
                            if cfg is not None else "dataset")
    name = Path(str(name)).stem
    width = max([len("Method")] + [len(r.method) for r in global_rows]) + 2
    table = [f"{'Method':<{width}}{name}",
             "-" * (width + max(len(name), 6))]
    for r in global_rows:
        table.append(f"{r.method:<{width}}{r.f1:.4f}")
    _write_lines(out / "summary_table.txt", table)
    if cfg is not None:
        (out / "scenario_config.json").write_text(
            json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
    return [out / "results.csv", out / "timing.csv",
            out / "methods_summary.csv", out / "summary_table.txt"]


def sweep_clients(base_cfg: ScenarioConfig, client_counts, out_dir=None):
    """Rerun the scenario per client count with re-derived partitions."""
    client_counts = [int(c) for c in client_counts]
    if any(c < 2 for c in client_counts):
        raise ConfigError("client counts must each be >= 2")
    results = {}
    for count in client_counts:
        cfg = replace(base_cfg, num_clients=count,
                      scenario_id=f"{base_cfg.effective_id}-n{count}")
        results[count] = run_scenario(cfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sweep = ["client_count,method,f1,threshold"]
        timing = ["client_count,method,client_id,wall_time_ms"]
        for count, rows in results.items():
            for r in rows:
                if r.client_id == "global":
                    sweep.append(f"{count},{r.method},{r.f1!r},{r.threshold!r}")
                timing.append(f"{count},{r.method},{r.client_id},"
                              f"{r.wall_time_ms!r}")
        _write_lines(out / "clients_sweep.csv", sweep)
        _write_lines(out / "timing_by_clients.csv", timing)
    return results


def sweep_corruption(base_cfg: ScenarioConfig, corrupt_counts, out_dir=None,
                     retrain: bool = False):
    """Corrupt nested client sets (0..c-1) and redo threshold selection.

    The model is trained once on the base clients and reused across
    corruption levels (corruption touches validation data only, so this
    isolates thresholding robustness); retrain=True re-runs FedAvg per
    level instead.
    """
    corrupt_counts = [int(c) for c in corrupt_counts]
    if any(c < 0 or c > base_cfg.num_clients for c in corrupt_counts):
        raise ConfigError(f"corrupt counts must lie in [0, "
                          f"{base_cfg.num_clients}]")
    _, _, clean_clients = _prepare_clients(base_cfg)
    channel = Channel()
    model = None
    if not retrain:
        model = _stage("train", _train, base_cfg, clean_clients, channel)
    results = {}
    for count in corrupt_counts:
        cfg = replace(base_cfg, corrupt_client_ids=tuple(range(count)),
                      scenario_id=f"{base_cfg.effective_id}-corrupt{count}")
        clients = _stage("corrupt", _apply_corruption, cfg, clean_clients)
        level_model = model
        if retrain:
            level_model = _stage("train", _train, cfg, clients, channel)
        results[count] = _run_thresholds(cfg, clients, level_model, channel)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sweep = ["corrupt_count,method,f1,threshold"]
        for count, rows in results.items():
            for r in rows:
                if r.client_id == "global":
                    sweep.append(f"{count},{r.method},{r.f1!r},{r.threshold!r}")
        _write_lines(out / "corruption_sweep.csv", sweep)
    return results


def build_followup_dataset(base_cfg: ScenarioConfig, num_runs: int,
                           out_dir=None):
    """Per-client summary-feature rows labeled with the federated-vs-local
    F1 difference, plus their correlation matrix.

    Each run re-derives data/partition/training seeds so clients see
    varied distributions; every client contributes one row per run.
    """
    if num_runs < 1:
        raise ConfigError("num_runs must be >= 1")
    needed = ("our_method", "local_minmax")
    feature_rows = []
    for run in range(num_runs):
        cfg = replace(
            base_cfg, methods=needed,
            data_seed=derive_seed(base_cfg.data_seed, run),
            partition_seed=derive_seed(base_cfg.partition_seed, run),
            train_seed=derive_seed(base_cfg.train_seed, run),
            scenario_id=f"{base_cfg.effective_id}-run{run}")
        artifacts = {}
        rows = run_scenario(cfg, artifacts=artifacts)
        fed_f1 = {r.client_id: r.f1 for r in rows if r.method == "our_method"}
        local_f1 = {r.client_id: r.f1 for r in rows
                    if r.method == "local_minmax"}
        for i, cs in enumerate(artifacts["class_summaries"]):
            feature_rows.append(collect_stat_features(
                cs, artifacts["global_normal"], artifacts["global_anomaly"],
                local_f1[str(i)], fed_f1[str(i)]))
    corr, constant = correlation_matrix(feature_rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [",".join(STAT_FEATURE_COLUMNS)]
        for row in feature_rows:
            lines.append(",".join(repr(float(v)) for v in row.as_array()))
        _write_lines(out / "followup_features.csv", lines)
        corr_lines = ["feature," + ",".join(STAT_FEATURE_COLUMNS)]
        for name, values in zip(STAT_FEATURE_COLUMNS, corr):
            corr_lines.append(
                name + "," + ",".join(repr(float(v)) for v in values))
        _write_lines(out / "followup_correlation.csv", corr_lines)
    return feature_rows, corr, constant
