#!/usr/bin/env python3

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

SEED_VARIABLE = "CMBX_SEED"


def env_get(key: str, boolean: bool = False) -> Union[str, bool]:
    """get an environment variable or fail with a meaningful error message

    :param key: name of environment variable
    :param boolean: bool (default: False), optional. Returns true if key in ["true", "y", "yes", "1"].
    :return: str or boolean
    """
    try:
        if boolean:
            return os.environ[key].lower() in ["true", "y", "yes", "1"]
        return os.environ[key]
    except KeyError:
        raise KeyError(f"No environment variable {key} found")


def default_seed(fallback: int = 0) -> int:
    """Seed from CMBX_SEED, or the fallback when unset.

    :param fallback: int (default: 0)
    :return: int
    """
    try:
        raw = env_get(SEED_VARIABLE)
    except KeyError:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_VARIABLE} must be an integer, got {raw!r}")


def read_json(path: Union[str, Path]) -> Any:
    with open(path, encoding="utf-8") as src:
        return json.load(src)


def write_json(data: Any, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as dst:
        json.dump(data, dst, indent=2)
        dst.write("\n")


def _pandas():
    try:
        import pandas as pd
    except ImportError as e:
        msg = (
            "cmbx.verify dependencies are not installed.\n\n"
            "Please pip install as follows:\n\n"
            "  python -m pip install cmbx[verify] --upgrade"
        )
        raise ImportError(str(e) + "\n\n" + msg)
    return pd


def read_regression_csv(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read a design matrix and a response from CSV with a header row, response in the last column.

    :param path: path to csv
    :return: tuple of U (samples x features) and a (samples,)

    >>> U, a = read_regression_csv(Path(__file__).parents[1] / "tests/testfiles/bss_identity.csv")
    >>> U.tolist(), a.tolist()
    ([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    """
    pd = _pandas()
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        raise ValueError(f"{path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ValueError(f"{path}: no data") from e
    if frame.shape[1] < 2 or frame.shape[0] < 1:
        raise ValueError(f"{path}: need a header, at least one row and two columns, got shape {frame.shape}")
    numbers = frame.apply(pd.to_numeric, errors="coerce")
    bad = numbers.isna()
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        # header is line 1
        raise ValueError(
            f"{path}, line {row + 2}: non-numeric value {frame.iat[row, col]!r} in column {frame.columns[col]!r}"
        )
    values = numbers.to_numpy(dtype=float)
    return values[:, :-1], values[:, -1]


def write_csv(records: List[Dict[str, Any]], path: Union[str, Path]):
    """One row per record, columns in order of first appearance."""
    pd = _pandas()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame.from_records(records).to_csv(path, index=False)


if __name__ == "__main__":
    import doctest

    doctest.testmod()
