"""Seeded experiment harness: scenarios, replications, aggregation, output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import model
from .estimators import Thresholds, run_estimator
from .exceptions import BmcError
from .metrics import Partition, ami, normalized_entropy, relative_accuracy
from .model import BmcInstance, BmcParams, PerturbationSpec, Trajectory

ENSEMBLES = ("uniform", "lowrank", "reversible", "assortative", "explicit",
             "dot_product_example", "two_cluster")
Z95 = 1.96


def child_seed(root: int, index: int) -> int:
    """Deterministic, well-mixed 63-bit seed for replication ``index``."""
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def path_length(n: int, spec: dict) -> int:
    """``floor(n (ln n)^beta)``, ``n^2`` or an explicit value."""
    kind = spec.get("kind", "log_power")
    if kind == "log_power":
        return int(math.floor(n * math.log(n) ** float(spec["beta"])))
    if kind == "quadratic":
        return n * n
    if kind == "explicit":
        return int(spec["value"])
    raise ValueError(f"unknown ell kind {kind!r}")


@dataclass
class Scenario:
    id: str = "scenario"
    ensemble: str = "uniform"
    K: int = 3
    n: int = 1000
    ell: dict = field(default_factory=lambda: {"kind": "log_power", "beta": 2.0})
    alpha: str = "uniform"
    d: int | None = None
    p0: float = 0.8
    a_dp: float = 1.0
    b_dp: float = 1.0
    params: dict | None = None
    epsilon: float = 0.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    estimators: list[str] = field(default_factory=lambda: ["alg2"])
    k_max: int = 10
    r_override: int | None = None
    replications: int = 10
    sequential: bool = False
    margin: float = 0.15
    min_samples: int = 250
    max_samples: int = 5000
    batch: int = 50
    root_seed: int = 0
    with_ami: bool = True

    def __post_init__(self):
        if isinstance(self.thresholds, dict):
            self.thresholds = Thresholds(**self.thresholds)
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.ensemble == "explicit" and self.params is None:
            raise ValueError("explicit ensemble needs params")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        path_length(self.n, self.ell)

    @property
    def ell_value(self) -> int:
        return path_length(self.n, self.ell)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = asdict(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    def sample_params(self, rng: np.random.Generator) -> BmcParams:
        e, K, n = self.ensemble, self.K, self.n
        if e == "uniform":
            return model.sample_uniform_ensemble(K, rng, n=n, alpha=self.alpha)
        if e == "lowrank":
            d = self.d if self.d is not None else math.ceil(K / 2)
            return model.sample_lowrank_ensemble(K, d, rng, n=n, alpha=self.alpha)
        if e == "reversible":
            return model.sample_reversible_ensemble(K, rng, n=n)
        if e == "assortative":
            return model.sample_assortative_ensemble(K, self.p0, rng, n=n, alpha=self.alpha)
        if e == "explicit":
            return BmcParams.from_dict(self.params)
        if e == "dot_product_example":
            return model.dot_product_example(self.a_dp, self.b_dp)
        if e == "two_cluster":
            return model.two_cluster_symmetric(self.p0)
        raise ValueError(e)


def table1_scenario(test: int, K: int, ell: str = "nlog2", n: int = 1000,
                    estimators=("alg2",), **kw) -> Scenario:
    """The four comparison scenarios, from easy (1) to hard (4)."""
    ell_spec = {"kind": "log_power", "beta": 2.0} if ell == "nlog2" else {"kind": "quadratic"}
    base = dict(id=f"test{test}_K{K}_{ell}", K=K, n=n, ell=ell_spec,
                estimators=list(estimators))
    if test == 1:
        base.update(ensemble="assortative", p0=0.8, alpha="const")
    elif test == 2:
        base.update(ensemble="uniform", alpha="uniform")
    elif test == 3:
        base.update(ensemble="uniform", alpha="const", epsilon=0.2)
    elif test == 4:
        base.update(ensemble="lowrank", alpha="const", d=math.ceil(K / 2))
    else:
        raise ValueError("test must be 1..4")
    base.update(kw)
    return Scenario(**base)


@dataclass
class ResultRow:
    scenario: str
    replication: int
    seed: int
    estimator: str
    k_true: int | None = None
    k_hat: int | None = None
    k_spec: int | None = None
    relative_accuracy: float | None = None
    ami: float | None = None
    information: float | None = None
    normalized_entropy: float | None = None
    t_mix: int | None = None
    error: str = ""
    wall_time_ms: float | None = None


ROW_FIELDS = [f.name for f in fields(ResultRow)]
_INT_FIELDS = {"replication", "seed", "k_true", "k_hat", "k_spec", "t_mix"}
_FLOAT_FIELDS = {"relative_accuracy", "ami", "information", "normalized_entropy", "wall_time_ms"}


def make_trajectory(s: Scenario, seed: int) -> tuple[BmcInstance, Trajectory]:
    rng = np.random.default_rng(seed)
    params = s.sample_params(rng)
    inst = model.build_instance(params, s.n)
    traj_seed = int(rng.integers(0, 2**63 - 1))
    sampler = model.perturb(inst, PerturbationSpec(s.epsilon))
    return inst, sampler.simulate(s.ell_value, traj_seed)


def _characteristics(inst: BmcInstance) -> dict:
    out = {"information": None, "normalized_entropy": None, "t_mix": None}
    out["information"] = model.information_quantity(inst.params)
    if inst.K >= 2:
        out["normalized_entropy"] = normalized_entropy(Partition(inst.sigma, inst.K))
    try:
        out["t_mix"] = model.mixing_time(inst.params)
    except BmcError:
        pass
    return out


def run_replication(s: Scenario, index: int, estimators: list[str] | None = None) -> list[ResultRow]:
    seed = child_seed(s.root_seed, index)
    est_ids = list(estimators if estimators is not None else s.estimators)
    base = dict(scenario=s.id, replication=index, seed=seed)
    try:
        inst, traj = make_trajectory(s, seed)
        chars = _characteristics(inst)
    except Exception as exc:  # noqa: BLE001 - recorded, never fatal
        return [ResultRow(estimator=e, error=f"{type(exc).__name__}: {exc}", **base)
                for e in est_ids]
    rows = []
    for e in est_ids:
        t0 = time.perf_counter()
        row = ResultRow(estimator=e, k_true=inst.K, **base, **chars)
        try:
            out = run_estimator(e, traj, s.thresholds, k_max=s.k_max, r_override=s.r_override)
            row.k_hat = int(out.k_hat)
            row.k_spec = None if out.k_spec is None else int(out.k_spec)
            row.relative_accuracy = relative_accuracy(row.k_hat, inst.K)
            if s.with_ami and out.labels is not None:
                row.ami = ami(Partition(inst.sigma, inst.K), Partition.from_labels(out.labels))
        except Exception as exc:  # noqa: BLE001
            row.error = f"{type(exc).__name__}: {exc}"
        row.wall_time_ms = (time.perf_counter() - t0) * 1e3
        rows.append(row)
    return rows


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BMC_THREADS", "1")))
    except ValueError:
        return 1


def _run_batch(s: Scenario, indices: list[int], est_ids: list[str], workers: int) -> list[ResultRow]:
    if workers <= 1 or len(indices) <= 1:
        chunks = [run_replication(s, i, est_ids) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(indices))) as ex:
            chunks = list(ex.map(run_replication, [s] * len(indices), indices,
                                 [est_ids] * len(indices)))
    return [r for chunk in chunks for r in chunk]


def run_scenario(s: Scenario, workers: int | None = None) -> list[ResultRow]:
    """Run all replications; rows come back ordered by replication index
    then estimator, whatever the worker count."""
    workers = _workers() if workers is None else workers
    if not s.sequential:
        return _run_batch(s, list(range(s.replications)), list(s.estimators), workers)

    rows: list[ResultRow] = []
    active = list(s.estimators)
    next_index = 0
    while active:
        size = max(s.batch, s.min_samples - next_index) if next_index < s.min_samples else s.batch
        idx = list(range(next_index, next_index + size))
        next_index += size
        rows.extend(_run_batch(s, idx, active, workers))
        cells = aggregate(rows)
        still = []
        for e in active:
            c = cells.get((s.id, e))
            done_n = 0 if c is None else c.count
            if done_n >= s.max_samples or next_index >= s.max_samples:
                continue
            if c is None or done_n < s.min_samples or c.margin > s.margin:
                still.append(e)
        active = still
    return rows


@dataclass
class CellStats:
    mean: float
    sd: float
    margin: float
    count: int
    errors: int = 0


def aggregate(rows) -> dict[tuple[str, str], CellStats]:
    """Per (scenario, estimator): mean, sample sd, 95% normal margin of
    error and count of ``k_hat``; error rows are only counted."""
    groups: dict[tuple[str, str], list] = {}
    errs: dict[tuple[str, str], int] = {}
    for r in rows:
        key = (r.scenario, r.estimator)
        if r.error or r.k_hat is None:
            errs[key] = errs.get(key, 0) + 1
            groups.setdefault(key, [])
        else:
            groups.setdefault(key, []).append(r.k_hat)
    out = {}
    for key, vals in groups.items():
        m = len(vals)
        if m == 0:
            out[key] = CellStats(math.nan, math.nan, math.inf, 0, errs.get(key, 0))
            continue
        arr = np.asarray(vals, dtype=float)
        mean = float(arr.mean())
        sd = float(arr.std(ddof=1)) if m > 1 else 0.0
        margin = Z95 * sd / math.sqrt(m) if m > 1 else math.inf
        out[key] = CellStats(mean, sd, margin, m, errs.get(key, 0))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows, include_timing: bool = False) -> str:
    cols = ROW_FIELDS if include_timing else [c for c in ROW_FIELDS if c != "wall_time_ms"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def _parse(name: str, text: str):
    if text == "":
        return None if name != "error" else ""
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def rows_from_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    return [ResultRow(**{k: _parse(k, v) for k, v in rec.items()}) for rec in reader]


def emit(rows, path, fmt: str = "csv", include_timing: bool = False) -> None:
    """Write rows as CSV (fixed column order) or JSON lines; floats keep
    17 significant digits.  Timing is left out by default so that reruns
    are byte-identical."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(rows_to_csv(rows, include_timing))
    elif fmt == "jsonl":
        with path.open("w") as fh:
            for r in rows:
                d = asdict(r)
                if not include_timing:
                    d.pop("wall_time_ms")
                fh.write(json.dumps(d, sort_keys=False) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def pivot_table(rows, estimators: list[str] | None = None) -> str:
    """Scenario x estimator grid of ``mean,sd`` pairs as CSV."""
    cells = aggregate(rows)
    scen = list(dict.fromkeys(r.scenario for r in rows))
    ests = estimators or list(dict.fromkeys(r.estimator for r in rows))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario"] + [f"{e}_{s}" for e in ests for s in ("mean", "sd", "count")])
    for sc in scen:
        line = [sc]
        for e in ests:
            c = cells.get((sc, e))
            line += ["", "", "0"] if c is None else [_fmt(c.mean), _fmt(c.sd), str(c.count)]
        w.writerow(line)
    return buf.getvalue()


def load_scenarios(path) -> list[Scenario]:
    data = json.loads(Path(path).read_text())
    items = data["scenarios"] if isinstance(data, dict) and "scenarios" in data else data
    if isinstance(items, dict):
        items = [items]
    return [Scenario.from_dict(d) for d in items]
