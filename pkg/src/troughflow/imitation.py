"""Imitation of the auction allocator by a trained network.

The dataset comes from closed-loop runs of the static plant under the
auction controller: at every controller tick one sample pairs the state
vector the controller saw with the apertures it produced. Samples are
shuffled with a recorded seed and split 70/15/15 into train/validation/test;
the input and target scalers are fit on the training split only.

The trained artifact (network + both scalers) serializes to a
self-describing text file with hex-encoded floats, so save/load round-trips
bit-exactly.
"""

import csv
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import IngestionError, TrainingError
from .network import MlpRegressor, RangeScaler, correlation_coefficients, forward
from .scenario import sample_faults, substream
from .simulate import feature_names, run_scenario

SPLIT_FRACTIONS = (0.70, 0.15, 0.15)
APERTURE_MIN = 0.01

MODEL_FORMAT_TAG = "troughflow-imitator-v1"


@dataclass
class Dataset:
    """Controller imitation samples with a recorded shuffle/split."""

    x: np.ndarray  # (n, 3*loops+5)
    y: np.ndarray  # (n, loops)
    run_id: np.ndarray  # (n,)
    tick: np.ndarray  # (n,)
    seed: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n_loops(self):
        return self.y.shape[1]

    def split(self, which):
        idx = {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}[
            which
        ]
        return self.x[idx], self.y[idx]

    def save_csv(self, path):
        names = feature_names(self.n_loops)
        targets = [f"y_v_{i + 1}" for i in range(self.n_loops)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run_id", "tick", *names, *targets])
            for k in range(self.x.shape[0]):
                row = [int(self.run_id[k]), int(self.tick[k])]
                row += [repr(float(v)) for v in self.x[k]]
                row += [repr(float(v)) for v in self.y[k]]
                writer.writerow(row)
        return path


def load_dataset_csv(path, seed=0):
    """Read a dataset CSV back (re-deriving the split from the given seed)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty dataset file") from None
        n_targets = sum(1 for h in header if h.startswith("y_v_"))
        n_features = len(header) - 2 - n_targets
        if n_targets == 0 or n_features <= 0:
            raise IngestionError(f"{path}: malformed dataset header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from None
    data = np.asarray(rows, dtype=float).reshape(-1, len(header))
    run_id = data[:, 0].astype(int)
    tick = data[:, 1].astype(int)
    x = data[:, 2 : 2 + n_features]
    y = data[:, 2 + n_features :]
    train, val, test = split_indices(x.shape[0], seed)
    return Dataset(
        x=x, y=y, run_id=run_id, tick=tick, seed=seed,
        train_idx=train, val_idx=val, test_idx=test,
    )


def split_indices(n, seed, fractions=SPLIT_FRACTIONS):
    """Shuffled train/val/test index arrays with the given fractions."""
    rng = substream(seed, "dataset-split")
    order = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return (
        order[:n_train],
        order[n_train : n_train + n_val],
        order[n_train + n_val :],
    )


def generate_dataset(base_scenario, profiles, n_fault_sets, seed=None):
    """Closed-loop campaign: every profile under n_fault_sets random faults.

    Each run simulates the static model with the auction controller and
    records one (state, next apertures) sample per controller tick. The
    inlet temperature is perturbed per fault set so that feature stays
    informative. Returns the shuffled, split Dataset.
    """
    seed = base_scenario.seed if seed is None else seed
    fault_rng = substream(seed, "campaign-faults")
    xs, ys, run_ids, ticks = [], [], [], []
    run_id = 0
    for profile in profiles:
        for _ in range(n_fault_sets):
            alpha_kopt, alpha_hl = sample_faults(fault_rng, base_scenario.n_loops)
            t_in = base_scenario.inlet_temperature + fault_rng.uniform(-3.0, 3.0)
            scn = replace(
                base_scenario,
                profile=profile,
                alpha_kopt=alpha_kopt,
                alpha_hl=alpha_hl,
                inlet_temperature=t_in,
                model="static",
                controller="auction",
                name=f"{base_scenario.name}-run{run_id}",
            )
            samples = []

            def recorder(tick_index, features, new_apertures):
                samples.append((tick_index, features, new_apertures))

            run_scenario(scn, on_controller_tick=recorder)
            for tick_index, features, new_apertures in samples:
                xs.append(features)
                ys.append(new_apertures)
                run_ids.append(run_id)
                ticks.append(tick_index)
            run_id += 1

    x = np.asarray(xs)
    y = np.asarray(ys)
    train, val, test = split_indices(x.shape[0], seed)
    return Dataset(
        x=x,
        y=y,
        run_id=np.asarray(run_ids),
        tick=np.asarray(ticks),
        seed=seed,
        train_idx=train,
        val_idx=val,
        test_idx=test,
    )


@dataclass
class ApertureImitator:
    """Trained aperture controller: scalers around the network, plus the
    clamp-and-renormalize convention (apertures in [0.01, 1], max pinned 1)."""

    x_scaler: RangeScaler
    y_scaler: RangeScaler
    weights: list
    biases: list
    seed: int = 0

    def apertures(self, features):
        x = np.asarray(features, dtype=float).reshape(1, -1)
        scaled = self.x_scaler.transform(x)
        if np.any(np.abs(scaled) > 1.0):
            warnings.warn(
                "controller state outside the training range; clamping",
                RuntimeWarning,
                stacklevel=2,
            )
            scaled = np.clip(scaled, -1.0, 1.0)
        raw = forward(self.weights, self.biases, scaled)
        v = self.y_scaler.inverse_transform(raw)[0]
        v = np.clip(v, APERTURE_MIN, 1.0)
        return v / np.max(v)

    def predict_scaled(self, x_scaled):
        """Network output in scaled space (for evaluation against targets)."""
        return forward(self.weights, self.biases, np.asarray(x_scaled, dtype=float))

    def save(self, path):
        lines = [MODEL_FORMAT_TAG]
        sizes = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        lines.append("layer_sizes: " + " ".join(str(s) for s in sizes))
        lines.append("hidden_activation: tanh")
        lines.append("output_activation: linear")
        lines.append(f"seed: {self.seed}")
        for tag, scaler in (("x", self.x_scaler), ("y", self.y_scaler)):
            lines.append(f"{tag}_min: " + _hex_row(scaler.data_min_))
            lines.append(f"{tag}_max: " + _hex_row(scaler.data_max_))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"layer {i} {w.shape[0]} {w.shape[1]}")
            for row in w:
                lines.append(_hex_row(row))
            lines.append(_hex_row(b))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path):
        try:
            text = open(path).read()
        except OSError as exc:
            raise IngestionError(f"cannot read model file {path}: {exc}") from None
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != MODEL_FORMAT_TAG:
            raise IngestionError(f"{path}: not a {MODEL_FORMAT_TAG} file")
        header = {}
        k = 1
        while k < len(lines) and not lines[k].startswith("layer "):
            key, value = lines[k].split(":", 1)
            header[key.strip()] = value.strip()
            k += 1
        try:
            sizes = [int(s) for s in header["layer_sizes"].split()]
            seed = int(header.get("seed", 0))
            scalers = {}
            for tag, n in (("x", sizes[0]), ("y", sizes[-1])):
                scaler = RangeScaler()
                scaler.data_min_ = _parse_hex_row(header[f"{tag}_min"], n)
                scaler.data_max_ = _parse_hex_row(header[f"{tag}_max"], n)
                scaler.n_features_in_ = n
                scalers[tag] = scaler
        except (KeyError, ValueError) as exc:
            raise IngestionError(f"{path}: malformed header: {exc}") from None
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            expect = f"layer {i} {fan_out} {fan_in}"
            if k >= len(lines) or lines[k] != expect:
                raise IngestionError(f"{path}: expected '{expect}' at line {k + 1}")
            k += 1
            w = np.empty((fan_out, fan_in))
            for r in range(fan_out):
                w[r] = _parse_hex_row(lines[k], fan_in)
                k += 1
            b = _parse_hex_row(lines[k], fan_out)
            k += 1
            weights.append(w)
            biases.append(b)
        return cls(
            x_scaler=scalers["x"], y_scaler=scalers["y"],
            weights=weights, biases=biases, seed=seed,
        )


def _hex_row(values):
    return " ".join(float(v).hex() for v in np.asarray(values, dtype=float))


def _parse_hex_row(line, expected):
    values = np.array([float.fromhex(tok) for tok in line.split()])
    if values.size != expected:
        raise ValueError(f"expected {expected} values, got {values.size}")
    return values


@dataclass
class TrainingReport:
    """Fit quality on the three splits, in scaled-aperture space."""

    train_mse: float
    val_mse: float
    test_mse: float
    pooled_correlation: float
    per_output_correlation: np.ndarray
    epochs: int
    stop_reason: str
    fit_seconds: float

    def text(self):
        lines = [
            f"train_mse: {self.train_mse:.3e}",
            f"val_mse: {self.val_mse:.3e}",
            f"test_mse: {self.test_mse:.3e}",
            f"pooled_correlation_pct: {100 * self.pooled_correlation:.2f}",
            "per_output_correlation_pct: "
            + " ".join(f"{100 * c:.2f}" for c in self.per_output_correlation),
            f"epochs: {self.epochs}",
            f"stop_reason: {self.stop_reason}",
            f"fit_seconds: {self.fit_seconds:.1f}",
        ]
        return "\n".join(lines) + "\n"


def train_imitator(dataset, hidden_layer_sizes=(50, 25, 10), max_epochs=4000,
                   seed=None, **lm_kwargs):
    """Fit scalers and network on the dataset's splits.

    Scalers are fit on the training split only; the validation split drives
    early stopping; the test split is only evaluated. Returns
    (ApertureImitator, TrainingReport).
    """
    if dataset.x.shape[0] == 0:
        raise TrainingError("dataset is empty")
    seed = dataset.seed if seed is None else seed
    x_train, y_train = dataset.split("train")
    x_val, y_val = dataset.split("val")
    x_test, y_test = dataset.split("test")

    x_scaler = RangeScaler().fit(x_train)
    y_scaler = RangeScaler().fit(y_train)
    xs, ys = x_scaler.transform(x_train), y_scaler.transform(y_train)
    xvs, yvs = x_scaler.transform(x_val), y_scaler.transform(y_val)
    xts, yts = x_scaler.transform(x_test), y_scaler.transform(y_test)

    init_seed = int(substream(seed, "weight-init").integers(2**31 - 1))
    model = MlpRegressor(
        hidden_layer_sizes=hidden_layer_sizes,
        max_epochs=max_epochs,
        random_state=init_seed,
        **lm_kwargs,
    )
    model.fit(xs, ys, validation=(xvs, yvs) if xvs.shape[0] else None)

    def mse(x, y):
        if x.shape[0] == 0:
            return np.nan
        err = model.predict(x) - y
        return float(np.mean(err * err))

    pooled, per_output = correlation_coefficients(yts, model.predict(xts)) if (
        xts.shape[0]
    ) else (np.nan, np.full(dataset.n_loops, np.nan))
    report = TrainingReport(
        train_mse=mse(xs, ys),
        val_mse=mse(xvs, yvs),
        test_mse=mse(xts, yts),
        pooled_correlation=pooled,
        per_output_correlation=per_output,
        epochs=model.n_epochs_,
        stop_reason=model.stop_reason_,
        fit_seconds=model.fit_seconds_,
    )
    imitator = ApertureImitator(
        x_scaler=x_scaler,
        y_scaler=y_scaler,
        weights=model.weights_,
        biases=model.biases_,
        seed=seed,
    )
    return imitator, report


def controller_latency(fn, repeats=30):
    """Median wall time of one controller evaluation [s]."""
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return float(np.median(times))
