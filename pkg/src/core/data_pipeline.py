"""Load, validate, normalize, window and split geo-coded daily series."""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, Field
from torch.utils.data import DataLoader, Dataset

from .config import DatasetDescriptor, SplitSpec
from .errors import DataValidationError

logger = logging.getLogger(__name__)

MAX_INTERPOLATED_GAP = 2
SPLIT_NAMES = ("train", "val", "test")
ArrayLike = Union[np.ndarray, torch.Tensor]


@dataclass(frozen=True, eq=False)
class GeoSeriesDataset:
    """A T×N temperature matrix with per-node coordinates and daily dates."""

    values: np.ndarray
    timestamps: pd.DatetimeIndex
    coords: np.ndarray
    name: str
    node_names: Tuple[str, ...] = field(default=())

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "GeoSeriesDataset":
        return GeoSeriesDataset(
            values=self.values[start:stop],
            timestamps=self.timestamps[start:stop],
            coords=self.coords,
            name=self.name,
            node_names=self.node_names,
        )


class NormStats(BaseModel):
    """Global z-score statistics fitted on the training partition."""

    mean: float
    std: float = Field(gt=0)

    def transform(self, values: ArrayLike) -> ArrayLike:
        return (values - self.mean) / self.std

    def inverse_transform(self, values: ArrayLike) -> ArrayLike:
        return values * self.std + self.mean


@dataclass
class WindowBatch:
    """Input windows [B, 1, N, u] with their targets [B, 1, N, v]."""

    inputs: torch.Tensor
    targets: torch.Tensor
    start_indices: List[int]

    def target_steps(self) -> torch.Tensor:
        """Targets laid out like model forecasts: [B, v, N]."""
        return self.targets[:, 0].permute(0, 2, 1)

    def to(self, device: Union[str, torch.device]) -> "WindowBatch":
        return WindowBatch(self.inputs.to(device), self.targets.to(device), self.start_indices)


def _check_exists(path: Path) -> None:
    if not Path(path).exists():
        raise FileNotFoundError(f"Data file not found: {path}")


def _read_table(path: Path) -> pd.DataFrame:
    """Read a CSV as raw strings, rejecting rows whose field count differs from the header's."""
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataValidationError(f"{path}: file is empty")
    except pd.errors.ParserError as e:
        found = re.search(r"Expected (\d+) fields in line (\d+), saw (\d+)", str(e))
        if found is None:
            raise DataValidationError(f"{path}: {e}") from e
        expected, line_no, fields = found.groups()
        raise DataValidationError(f"{path}:{line_no}: ragged row with {fields} fields, expected {expected}") from e

    # short rows come back padded with NaN; present fields are strings
    short = np.flatnonzero(raw.isna().any(axis=1).to_numpy())
    if short.size:
        row = int(short[0])
        raise DataValidationError(
            f"{path}:{row + 1}: ragged row with {int(raw.iloc[row].notna().sum())} fields, expected {raw.shape[1]}"
        )
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(name).strip() for name in raw.iloc[0]]
    return frame


def _normalize_node_name(value) -> str:
    text = str(value).strip()
    return text if text.startswith("node_") else f"node_{text}"


def _interpolate_short_gaps(frame: pd.DataFrame, path: Path) -> pd.DataFrame:
    """Linearly fill interior gaps of at most MAX_INTERPOLATED_GAP days."""
    missing = frame.isna().to_numpy()
    for col in range(missing.shape[1]):
        padded = np.concatenate([[False], missing[:, col], [False]]).astype(np.int8)
        edges = np.diff(padded)
        starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
        for start, stop in zip(starts, stops):
            if start == 0 or stop == missing.shape[0]:
                raise DataValidationError(
                    f"{path}: gap at series edge in column {frame.columns[col]} cannot be interpolated",
                    cells=[(int(start), col)],
                )
            if stop - start > MAX_INTERPOLATED_GAP:
                raise DataValidationError(
                    f"{path}: gap of {stop - start} days in column {frame.columns[col]} "
                    f"starting at row {start} exceeds {MAX_INTERPOLATED_GAP}",
                    cells=[(int(start), col)],
                )
    return frame.interpolate(method="linear", limit_area="inside")


def _load_values(path: Path, interpolate_gaps: bool) -> Tuple[pd.DatetimeIndex, pd.DataFrame]:
    frame = _read_table(path)
    if frame.columns[0] != "date":
        raise DataValidationError(f"{path}: first column must be 'date', got {frame.columns[0]!r}")

    dates = pd.to_datetime(frame["date"], errors="coerce")
    bad_dates = np.flatnonzero(dates.isna().to_numpy())
    if bad_dates.size:
        raise DataValidationError(f"{path}: unparseable date at row {bad_dates[0]}")

    # exact differences, so a 36-hour step is not read as one day
    steps = np.diff(dates.to_numpy())
    non_increasing = np.flatnonzero(steps <= np.timedelta64(0, "ns"))
    if non_increasing.size:
        raise DataValidationError(
            f"{path}: dates not strictly increasing at row {non_increasing[0] + 1}"
        )
    off_cadence = np.flatnonzero(steps != np.timedelta64(1, "D"))
    if off_cadence.size:
        found = pd.Timedelta(steps[off_cadence[0]])
        raise DataValidationError(
            f"{path}: expected a 1-day stride, found {found} at row {off_cadence[0] + 1}"
        )

    values = frame.drop(columns=["date"]).apply(pd.to_numeric, errors="coerce")
    values = values.replace([np.inf, -np.inf], np.nan)
    if values.isna().to_numpy().any():
        if interpolate_gaps:
            values = _interpolate_short_gaps(values, path)
        else:
            rows, cols = np.nonzero(values.isna().to_numpy())
            cells = [(int(r), int(c)) for r, c in zip(rows, cols)]
            shown = ", ".join(f"(row {r}, col {c})" for r, c in cells[:5])
            raise DataValidationError(f"{path}: {len(cells)} missing or non-finite cells: {shown}", cells=cells)
    return pd.DatetimeIndex(dates), values


def _load_coords(path: Path, node_names: Sequence[str]) -> np.ndarray:
    frame = _read_table(path)
    if list(frame.columns) != ["node", "lat", "lon"]:
        raise DataValidationError(f"{path}: header must be node,lat,lon, got {','.join(frame.columns)}")
    frame["node"] = frame["node"].map(_normalize_node_name)
    if frame["node"].duplicated().any():
        raise DataValidationError(f"{path}: duplicated node ids")
    frame = frame.set_index("node")
    missing = [name for name in node_names if name not in frame.index]
    if missing or len(frame) != len(node_names):
        raise DataValidationError(
            f"{path}: coordinates must list exactly the {len(node_names)} value columns "
            f"(missing: {missing[:5]})"
        )
    coords = frame.loc[list(node_names), ["lat", "lon"]].apply(pd.to_numeric, errors="coerce")
    coords = coords.to_numpy(dtype=np.float64)
    if not np.isfinite(coords).all():
        raise DataValidationError(f"{path}: non-finite coordinates")
    if np.unique(coords, axis=0).shape[0] != coords.shape[0]:
        raise DataValidationError(f"{path}: coordinate rows must be unique")
    return coords


def load_dataset(
    descriptor: Union[Path, str, DatasetDescriptor],
    interpolate_gaps: bool = False,
) -> GeoSeriesDataset:
    """Load and validate ``values.csv`` and ``coords.csv`` named by a descriptor."""
    if not isinstance(descriptor, DatasetDescriptor):
        descriptor = DatasetDescriptor.from_file(Path(descriptor))
    _check_exists(descriptor.values_path)
    _check_exists(descriptor.coords_path)

    dates, frame = _load_values(descriptor.values_path, interpolate_gaps)
    node_names = tuple(_normalize_node_name(c) for c in frame.columns)
    coords = _load_coords(descriptor.coords_path, node_names)
    values = frame.to_numpy(dtype=np.float64)

    if descriptor.expected_T is not None and values.shape[0] != descriptor.expected_T:
        raise DataValidationError(
            f"{descriptor.values_path}: expected T={descriptor.expected_T}, found {values.shape[0]}"
        )
    if descriptor.expected_N is not None and values.shape[1] != descriptor.expected_N:
        raise DataValidationError(
            f"{descriptor.values_path}: expected N={descriptor.expected_N}, found {values.shape[1]}"
        )

    logger.info(
        f"Loaded {descriptor.name}: T={values.shape[0]}, N={values.shape[1]}, "
        f"{dates[0].date()} .. {dates[-1].date()}"
    )
    return GeoSeriesDataset(values, dates, coords, descriptor.name, node_names)


def fit_normalizer(train_slice: ArrayLike) -> NormStats:
    """Population mean/std over the training partition only."""
    values = np.asarray(train_slice, dtype=np.float64)
    if values.size == 0:
        raise DataValidationError("cannot fit normalizer on an empty training slice")
    std = float(values.std())
    if std <= 1e-8:
        raise DataValidationError("zero variance in training slice; z-score normalization undefined")
    return NormStats(mean=float(values.mean()), std=std)


def window_count(length: int, input_length: int, horizon: int) -> int:
    required = input_length + horizon
    if length < required:
        raise DataValidationError(
            f"partition of length {length} is too short: need at least {required} timesteps "
            f"(u={input_length} + v={horizon})"
        )
    return length - required + 1


class SlidingWindowDataset(Dataset):
    """Stride-1 windows over a [T, N] partition."""

    def __init__(self, data: ArrayLike, input_length: int, horizon: int, dtype: torch.dtype = torch.float32):
        self.data = torch.as_tensor(np.asarray(data), dtype=dtype)
        if self.data.dim() != 2:
            raise DataValidationError(f"expected a [T, N] matrix, got shape {tuple(self.data.shape)}")
        self.input_length = input_length
        self.horizon = horizon
        self._count = window_count(self.data.shape[0], input_length, horizon)

    def __len__(self) -> int:
        return self._count

    def __getitem__(self, start: int):
        u, v = self.input_length, self.horizon
        inputs = self.data[start:start + u].T.unsqueeze(0)
        targets = self.data[start + u:start + u + v].T.unsqueeze(0)
        return inputs, targets, start


def collate_windows(items) -> WindowBatch:
    inputs, targets, starts = zip(*items)
    return WindowBatch(torch.stack(inputs), torch.stack(targets), list(starts))


def make_windows(
    data: ArrayLike,
    input_length: int,
    horizon: int,
    batch_size: int = 64,
    shuffle: bool = False,
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
) -> Iterable[WindowBatch]:
    """Stream every valid window of a partition as WindowBatch objects.

    Shuffled order is drawn from a dedicated generator so iteration order is
    reproducible under a fixed seed.
    """
    dataset = SlidingWindowDataset(data, input_length, horizon, dtype=dtype)
    generator = torch.Generator().manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        generator=generator,
        collate_fn=collate_windows,
    )


def split_lengths(num_steps: int, spec: SplitSpec) -> Tuple[int, int, int]:
    """Train takes the ceiling of its share, val the floor, test the rest."""
    train = math.ceil(spec.train_frac * num_steps - 1e-9)
    val = math.floor(spec.val_frac * num_steps + 1e-9)
    return train, val, num_steps - train - val


def chronological_split(
    dataset: GeoSeriesDataset, spec: SplitSpec
) -> Tuple[GeoSeriesDataset, GeoSeriesDataset, GeoSeriesDataset]:
    train_len, val_len, test_len = split_lengths(dataset.num_steps, spec)
    logger.info(
        f"Chronological split train->val->test of {dataset.name}: "
        f"{train_len}/{val_len}/{test_len} (no shuffling, no look-ahead)"
    )
    return (
        dataset.slice(0, train_len),
        dataset.slice(train_len, train_len + val_len),
        dataset.slice(train_len + val_len, dataset.num_steps),
    )


@dataclass(eq=False)
class PreparedSplits:
    """Raw split partitions plus the normalizer fitted on the training one."""

    splits: Dict[str, GeoSeriesDataset]
    norm_stats: NormStats

    @property
    def name(self) -> str:
        return self.splits["train"].name

    @property
    def num_nodes(self) -> int:
        return self.splits["train"].num_nodes

    def normalized(self, split: str) -> np.ndarray:
        if split not in self.splits:
            raise DataValidationError(f"unknown split '{split}', expected one of {SPLIT_NAMES}")
        return self.norm_stats.transform(self.splits[split].values).astype(np.float32)

    def summary(self) -> Dict[str, object]:
        train, test = self.splits["train"], self.splits["test"]
        return {
            "name": self.name,
            "T": sum(s.num_steps for s in self.splits.values()),
            "N": self.num_nodes,
            "date_range": [str(train.timestamps[0].date()), str(test.timestamps[-1].date())],
            "split_lengths": {k: s.num_steps for k, s in self.splits.items()},
            "norm_stats": self.norm_stats.model_dump(),
        }

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for split, data in self.splits.items():
            np.save(directory / f"{split}_values.npy", data.values)
            np.save(directory / f"{split}_normalized.npy", self.normalized(split))
            np.save(directory / f"{split}_dates.npy", data.timestamps.to_numpy().astype("datetime64[D]"))
        train = self.splits["train"]
        np.save(directory / "coords.npy", train.coords)
        with open(directory / "nodes.json", "w") as f:
            json.dump(list(train.node_names), f)
        with open(directory / "norm_stats.json", "w") as f:
            f.write(self.norm_stats.model_dump_json(indent=2))

    @classmethod
    def load(cls, directory: Path, name: str) -> "PreparedSplits":
        directory = Path(directory)
        if not (directory / "norm_stats.json").exists():
            raise FileNotFoundError(f"No prepared data under {directory}")
        coords = np.load(directory / "coords.npy")
        with open(directory / "nodes.json", "r") as f:
            node_names = tuple(json.load(f))
        splits = {}
        for split in SPLIT_NAMES:
            splits[split] = GeoSeriesDataset(
                values=np.load(directory / f"{split}_values.npy"),
                timestamps=pd.DatetimeIndex(np.load(directory / f"{split}_dates.npy")),
                coords=coords,
                name=name,
                node_names=node_names,
            )
        with open(directory / "norm_stats.json", "r") as f:
            stats = NormStats.model_validate_json(f.read())
        return cls(splits, stats)


def prepare_splits(dataset: GeoSeriesDataset, spec: SplitSpec) -> PreparedSplits:
    train, val, test = chronological_split(dataset, spec)
    stats = fit_normalizer(train.values)
    return PreparedSplits({"train": train, "val": val, "test": test}, stats)
