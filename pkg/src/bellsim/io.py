"""CSV and JSON serialization.

CSV layouts (header row first, one record per line):

* raw records:   ``trial_index,x,y,a,b``
* click events:  ``timestamp,setting,polarity`` (timestamps as shortest round-trip floats)
* settings log:  ``slot,setting``
* final pairs:   ``a,b`` (one file per setting pair)
* quadruples:    ``a1,a2,b1,b2``

JSON is written with sorted keys and two-space indentation so that identical
inputs give identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .events import ClickStream, RawDataset
from .model import SETTING_PAIRS
from .pipeline import FinalDataset

RAW_HEADER = "trial_index,x,y,a,b"
CLICK_HEADER = "timestamp,setting,polarity"
LOG_HEADER = "slot,setting"
FINAL_HEADER = "a,b"
QUAD_HEADER = "a1,a2,b1,b2"


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def _rows(header: str, columns) -> str:
    lines = [header]
    lines.extend(",".join(row) for row in zip(*columns))
    return "\n".join(lines) + "\n"


def _ints(a) -> list[str]:
    return list(map(str, np.asarray(a).tolist()))


def raw_csv(raw: RawDataset) -> str:
    return _rows(RAW_HEADER, [_ints(raw.trial_index), _ints(raw.x), _ints(raw.y), _ints(raw.a), _ints(raw.b)])


def clicks_csv(stream: ClickStream) -> str:
    return _rows(CLICK_HEADER, [list(map(repr, stream.times.tolist())), _ints(stream.settings),
                                _ints(stream.polarity)])


def settings_log_csv(stream: ClickStream) -> str:
    return _rows(LOG_HEADER, [_ints(np.arange(stream.settings_log.size)), _ints(stream.settings_log)])


def pairs_csv(ab: np.ndarray) -> str:
    return _rows(FINAL_HEADER, [_ints(ab[:, 0]), _ints(ab[:, 1])])


def quadruples_csv(samples: np.ndarray) -> str:
    return _rows(QUAD_HEADER, [_ints(samples[:, i]) for i in range(4)])


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def write_raw(raw: RawDataset, path) -> None:
    _write(path, raw_csv(raw))


def write_clicks(stream: ClickStream, path, log_path) -> None:
    _write(path, clicks_csv(stream))
    _write(log_path, settings_log_csv(stream))


def write_final(final: FinalDataset, directory) -> None:
    d = Path(directory)
    for x, y in SETTING_PAIRS:
        _write(d / f"final_{x}{y}.csv", pairs_csv(final.pairs[(x, y)]))
    write_json({"discard_accounting": final.discard_accounting()}, d / "final.json")


def _read_table(path, header: str, dtype) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != header:
        raise ValueError(f"{path}: expected header {header!r}")
    ncol = header.count(",") + 1
    if len(text) == 1:
        return np.zeros((0, ncol), dtype=dtype)
    return np.array([line.split(",") for line in text[1:]], dtype=dtype).reshape(-1, ncol)


def read_raw(path, metadata=None) -> RawDataset:
    t = _read_table(path, RAW_HEADER, np.int64)
    return RawDataset(t[:, 0], t[:, 1], t[:, 2], t[:, 3], t[:, 4], dict(metadata or {}))


def read_clicks(path, log_path, station: str) -> ClickStream:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != CLICK_HEADER:
        raise ValueError(f"{path}: expected header {CLICK_HEADER!r}")
    rows = [line.split(",") for line in text[1:]]
    times = np.array([float(r[0]) for r in rows])
    settings = np.array([int(r[1]) for r in rows], dtype=np.int8)
    polarity = np.array([int(r[2]) for r in rows], dtype=np.int8)
    log = _read_table(log_path, LOG_HEADER, np.int64)
    return ClickStream(station, times, settings, polarity, log[:, 1])


def read_quadruples(path) -> np.ndarray:
    return _read_table(path, QUAD_HEADER, np.int8)
