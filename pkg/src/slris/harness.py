"""Experiment orchestration: Monte Carlo SINR sweeps and classifier evaluation.

Each realization owns a random stream derived from ``(seed, realization
index)``. From it, in a fixed order, come the uniform used for theta (in the
K sweep), the window SNR, the label-corruption draws and the I/Q window
itself. Nothing in a realization depends on the sweep cell, so every cell of
a sweep sees the same observations (common random numbers): "RIS always
OFF" is then exactly flat in K, and the classifier only has to run once per
realization.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import dataset as ds_mod
from . import neuralnet as nn
from .channel import ScenarioParams, layout, link_budget
from .controller import decide
from .signalgen import TRAINING_SNR_RANGE_DB, SignalClass, make_window

logger = logging.getLogger(__name__)

SCHEMES = ("Proposed", "AlwaysOn", "AlwaysOff")
CSV_HEADER = ("sweep_var", "scheme", "mean_sinr_db", "n", "cls_accuracy")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioParams = ScenarioParams()
    theta_grid: Tuple[float, ...] = tuple(float(t) for t in range(30, 151, 10))
    k_grid: Tuple[int, ...] = tuple(range(1, 11))
    k_fixed: int = 1
    theta_range: Tuple[float, float] = (30.0, 120.0)
    model_path: Optional[str] = None
    realizations: int = 10_000
    schemes: Tuple[str, ...] = SCHEMES
    seed: int = 0
    out: str = "results"
    window_len: int = 512
    snr_range: Tuple[float, float] = TRAINING_SNR_RANGE_DB
    true_class: str = "Both"
    perfect_classifier: bool = False
    n_per_class: int = 10_000
    split_ratio: float = 0.8
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.theta_grid or not self.k_grid:
            raise ValueError("sweep grids must be non-empty")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown or not self.schemes:
            raise ValueError(f"schemes must be a non-empty subset of {SCHEMES}")
        _parse_class(self.true_class)

    @property
    def truth(self) -> SignalClass:
        return _parse_class(self.true_class)

    def replace(self, **changes) -> "ExperimentConfig":
        scen = {k: changes.pop(k) for k in list(changes) if k in _SCENARIO_KEYS}
        if scen:
            changes["scenario"] = self.scenario.replace(**scen)
        return dataclasses.replace(self, **changes)


_CLASS_NAMES = {"Idle": SignalClass.IDLE, "DOnly": SignalClass.D_ONLY, "IOnly": SignalClass.I_ONLY, "Both": SignalClass.BOTH}
_SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioParams)}
_EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"scenario"}


def _parse_class(name: str) -> SignalClass:
    try:
        return _CLASS_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown class {name!r}; expected one of {sorted(_CLASS_NAMES)}") from None


def config_from_mapping(values: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Build a config from flat ``{field: value}`` pairs (scenario + experiment fields)."""
    base = base or ExperimentConfig()
    unknown = set(values) - _SCENARIO_KEYS - _EXPERIMENT_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    changes = {}
    for k, v in values.items():
        if isinstance(v, list):
            v = tuple(v)
        changes[k] = v
    return base.replace(**changes)


def load_config(path) -> ExperimentConfig:
    """Read a flat JSON object whose keys are config field names."""
    with open(path) as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise ValueError("config file must hold a JSON object")
    return config_from_mapping(values)


def config_to_mapping(config: ExperimentConfig) -> dict:
    out = dataclasses.asdict(config.scenario)
    for k in sorted(_EXPERIMENT_KEYS):
        v = getattr(config, k)
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


# ---------------------------------------------------------------------------
# Classifiers seen by the sweeps
# ---------------------------------------------------------------------------


@dataclass
class Observation:
    theta_u: float
    snr_db: float
    corrupt_u: float
    corrupt_shift: int
    window: Optional[np.ndarray]


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 0x5EED, index]))


def observe(config: ExperimentConfig, rng: np.random.Generator, need_window: bool = True) -> Observation:
    """Draw one realization's random inputs in the fixed order."""
    theta_u = rng.uniform()
    snr_db = rng.uniform(*config.snr_range)
    corrupt_u = rng.uniform()
    corrupt_shift = int(rng.integers(1, 4))
    window = make_window(config.truth, config.window_len, snr_db, rng=rng).samples if need_window else None
    return Observation(theta_u, snr_db, corrupt_u, corrupt_shift, window)


class ModelClassifier:
    needs_window = True

    def __init__(self, model: nn.CnnModel):
        self.model = model

    def classify(self, observations: Sequence[Observation], truth: SignalClass) -> np.ndarray:
        iq = np.stack([o.window for o in observations])
        return nn.predict_classes(self.model, iq)


class PerfectClassifier:
    """Ground-truth oracle standing in for the CNN."""

    needs_window = False

    def classify(self, observations, truth):
        return np.full(len(observations), int(truth))


class CorruptedClassifier:
    """Ground truth, replaced by a uniformly chosen wrong class with probability ``rate``.

    The corruption draws live in each realization's stream, so the set of
    corrupted realizations at a lower rate is contained in the set at a
    higher rate.
    """

    needs_window = False

    def __init__(self, rate: float):
        if not 0.0 <= rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        self.rate = rate

    def classify(self, observations, truth):
        out = np.full(len(observations), int(truth))
        for i, o in enumerate(observations):
            if o.corrupt_u < self.rate:
                out[i] = (int(truth) + o.corrupt_shift) % 4
        return out


def make_classifier(config: ExperimentConfig, model: Optional[nn.CnnModel] = None):
    if config.perfect_classifier:
        return PerfectClassifier()
    if model is None:
        if not config.model_path:
            raise ValueError("a trained model is required unless perfect_classifier is set")
        model = nn.load_model(config.model_path)
    if model.L != config.window_len:
        raise ValueError(f"model expects windows of {model.L} samples, config uses {config.window_len}")
    return ModelClassifier(model)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


@dataclass
class RealizationResult:
    sinr_db: Dict[str, float]
    inferred_class: SignalClass
    correct: bool


def score(config: ExperimentConfig, theta: float, K: int, inferred: SignalClass) -> Dict[str, float]:
    """Achieved SINR of each scheme, always evaluated under the true occupancy."""
    params = config.scenario.replace(theta=float(theta), K=int(K))
    lay = layout(params)
    truth = config.truth
    actual = link_budget(params, lay, truth.desired_active, truth.interferer_active)
    out = {}
    for scheme in config.schemes:
        if scheme == "Proposed":
            posterior = np.zeros(4)
            posterior[int(inferred)] = 1.0
            states = decide(posterior, params, lay).states
        elif scheme == "AlwaysOn":
            states = np.ones(K, dtype=bool)
        else:
            states = np.zeros(K, dtype=bool)
        out[scheme] = actual.sinr_db(states)
    return out


def run_realization(config: ExperimentConfig, theta: float, K: int, rng: np.random.Generator, classifier) -> RealizationResult:
    """Run one realization from observation to per-scheme SINR."""
    obs = observe(config, rng, classifier.needs_window)
    inferred = SignalClass(int(classifier.classify([obs], config.truth)[0]))
    return RealizationResult(score(config, theta, K, inferred), inferred, inferred == config.truth)


def _observe_all(config: ExperimentConfig, classifier) -> Tuple[List[Observation], np.ndarray]:
    observations = [
        observe(config, realization_rng(config.seed, r), classifier.needs_window) for r in range(config.realizations)
    ]
    inferred = np.asarray(classifier.classify(observations, config.truth), dtype=int)
    return observations, inferred


@dataclass
class SweepRow:
    value: float
    scheme: str
    mean_sinr_db: float
    n: int
    cls_accuracy: float


def _rows_for_cell(config, value, sinr_by_scheme, accuracy) -> List[SweepRow]:
    n = config.realizations
    return [SweepRow(value, s, float(np.mean(sinr_by_scheme[s])), n, accuracy) for s in config.schemes]


def sweep_theta(config: ExperimentConfig, classifier=None) -> List[SweepRow]:
    """Mean SINR per scheme on the theta grid with ``k_fixed`` surfaces."""
    if not config.theta_grid:
        raise ValueError("empty theta grid")
    classifier = classifier or make_classifier(config)
    _, inferred = _observe_all(config, classifier)
    accuracy = float(np.mean(inferred == int(config.truth)))
    rows = []
    for theta in config.theta_grid:
        # the scenario is fixed within a cell, so score each inferred class once
        by_class = {c: score(config, theta, config.k_fixed, SignalClass(c)) for c in np.unique(inferred)}
        sinr = {s: np.array([by_class[c][s] for c in inferred]) for s in config.schemes}
        rows.extend(_rows_for_cell(config, theta, sinr, accuracy))
    return rows


def sweep_k(config: ExperimentConfig, classifier=None) -> List[SweepRow]:
    """Mean SINR per scheme against the number of surfaces, theta ~ U(theta_range)."""
    if not config.k_grid:
        raise ValueError("empty K grid")
    classifier = classifier or make_classifier(config)
    observations, inferred = _observe_all(config, classifier)
    accuracy = float(np.mean(inferred == int(config.truth)))
    lo, hi = config.theta_range
    thetas = [lo + (hi - lo) * o.theta_u for o in observations]
    rows = []
    for K in config.k_grid:
        sinr = {s: np.empty(len(thetas)) for s in config.schemes}
        for r, (theta, c) in enumerate(zip(thetas, inferred)):
            for s, v in score(config, theta, K, SignalClass(int(c))).items():
                sinr[s][r] = v
        rows.extend(_rows_for_cell(config, K, sinr, accuracy))
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([f"{r.value:.6g}", r.scheme, f"{r.mean_sinr_db:.6g}", r.n, f"{r.cls_accuracy:.6g}"])
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def rows_as_table(rows: Sequence[SweepRow]) -> Dict[str, Dict[float, float]]:
    """``{scheme: {sweep value: mean SINR dB}}`` for quick inspection."""
    table: Dict[str, Dict[float, float]] = {}
    for r in rows:
        table.setdefault(r.scheme, {})[r.value] = r.mean_sinr_db
    return table


# ---------------------------------------------------------------------------
# Classifier evaluation
# ---------------------------------------------------------------------------


@dataclass
class ClassifierEvaluation:
    confusion: np.ndarray
    per_class_accuracy: np.ndarray
    overall_accuracy: float

    def to_csv(self) -> str:
        names = [c.name for c in SignalClass]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *names, "accuracy"])
        for i, name in enumerate(names):
            w.writerow([name, *self.confusion[i].tolist(), f"{self.per_class_accuracy[i]:.6g}"])
        w.writerow(["overall", *[""] * len(names), f"{self.overall_accuracy:.6g}"])
        return buf.getvalue()


Predictor = Union[nn.CnnModel, Callable[[np.ndarray], np.ndarray]]


def eval_classifier(model: Predictor, test: ds_mod.LabeledDataset) -> ClassifierEvaluation:
    """Confusion matrix of ``model`` on ``test``.

    ``model`` is a ``CnnModel`` or any callable mapping an (n, L) complex
    array to n predicted class indices.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    if isinstance(model, nn.CnnModel):
        pred = nn.predict_classes(model, test.iq)
    else:
        pred = np.asarray(model(test.iq))
    cm = nn.confusion_matrix(test.labels, pred)
    return ClassifierEvaluation(cm, nn.per_class_accuracy(cm), float(np.trace(cm) / cm.sum()))


# ---------------------------------------------------------------------------
# Pipeline steps
# ---------------------------------------------------------------------------


def generate_data(config: ExperimentConfig) -> ds_mod.LabeledDataset:
    return ds_mod.build_dataset(config.n_per_class, config.window_len, config.snr_range, seed=config.seed)


def train_model(config: ExperimentConfig, data: ds_mod.LabeledDataset) -> Tuple[nn.CnnModel, nn.TrainReport]:
    parts = ds_mod.split(data, config.split_ratio, config.seed)
    init = nn.init_model(data.L, seed=config.seed)
    tc = nn.TrainConfig(
        learning_rate=config.learning_rate, batch_size=config.batch_size, epochs=config.epochs, seed=config.seed
    )
    return nn.train(init, parts, tc)


def run_all(config: ExperimentConfig) -> Dict[str, Path]:
    """Data -> model -> evaluation -> both sweeps, everything written under ``config.out``."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "dataset": out / "dataset.risl",
        "model": out / "model.rism",
        "report": out / "train_report.json",
        "confusion": out / "confusion.csv",
        "sweep_theta": out / "sweep_theta.csv",
        "sweep_k": out / "sweep_k.csv",
    }
    data = generate_data(config)
    ds_mod.save(data, paths["dataset"])
    logger.info("dataset: %d windows of %d samples -> %s", len(data), data.L, paths["dataset"])

    model, report = train_model(config, data)
    nn.save_model(model, paths["model"])
    paths["report"].write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    test = ds_mod.split(data, config.split_ratio, config.seed).test
    paths["confusion"].write_text(eval_classifier(model, test).to_csv())

    classifier = PerfectClassifier() if config.perfect_classifier else ModelClassifier(model)
    write_csv(sweep_theta(config, classifier), paths["sweep_theta"])
    write_csv(sweep_k(config, classifier), paths["sweep_k"])
    return paths


__all__ = [
    "ClassifierEvaluation",
    "CorruptedClassifier",
    "ExperimentConfig",
    "ModelClassifier",
    "PerfectClassifier",
    "RealizationResult",
    "SweepRow",
    "config_from_mapping",
    "eval_classifier",
    "load_config",
    "run_all",
    "run_realization",
    "sweep_k",
    "sweep_theta",
    "write_csv",
]
