"""Golden oracle values for the bundled gallery.

One JSON file per gallery model holds the model's content hash, its exact
report and the joint-probability verdict for its post-selected tables.
Numbers are compared with absolute tolerance ``FIXTURE_TOL``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .coupling import jp_feasibility
from .exact import exact_report
from .io import dumps_json
from .model import ModelError, gallery_dir, gallery_model, gallery_names

FIXTURE_TOL = 1e-12


def fixtures_dir() -> Path:
    return Path(str(resources.files("bellsim") / "fixtures"))


def fixture_payload(model) -> dict:
    report = exact_report(model)
    payload = {"model": model.name, "content_hash": model.content_hash, "exact": report.to_dict()}
    if report.conditional_defined:
        res = jp_feasibility(report.pairwise_distributions())
        payload["feasibility"] = {"status": res.status, "max_facet_violation": res.max_facet_violation}
    else:
        payload["feasibility"] = None
    return payload


def make_fixtures(gallery=None, fixtures=None) -> list[Path]:
    gallery = Path(gallery) if gallery is not None else gallery_dir()
    fixtures = Path(fixtures) if fixtures is not None else fixtures_dir()
    fixtures.mkdir(parents=True, exist_ok=True)
    written = []
    for name in gallery_names(gallery):
        path = fixtures / f"{name}.json"
        path.write_text(dumps_json(fixture_payload(gallery_model(name, gallery))), encoding="utf-8")
        written.append(path)
    return written


def _diff(expected, actual, where: str, out: list[str]) -> None:
    if isinstance(expected, dict) and isinstance(actual, dict):
        for k in sorted(set(expected) | set(actual)):
            if k not in expected or k not in actual:
                out.append(f"{where}.{k}: present on one side only")
            else:
                _diff(expected[k], actual[k], f"{where}.{k}", out)
    elif isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            out.append(f"{where}: length {len(expected)} != {len(actual)}")
        for i, (e, a) in enumerate(zip(expected, actual)):
            _diff(e, a, f"{where}[{i}]", out)
    elif isinstance(expected, (int, float)) and isinstance(actual, (int, float)) \
            and not isinstance(expected, bool) and not isinstance(actual, bool):
        if not math.isclose(expected, actual, rel_tol=0.0, abs_tol=FIXTURE_TOL):
            out.append(f"{where}: fixture {expected!r} != recomputed {actual!r}")
    elif expected != actual:
        out.append(f"{where}: fixture {expected!r} != recomputed {actual!r}")


@dataclass
class FixtureCheck:
    offenders: dict[str, list[str]] = field(default_factory=dict)
    checked: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.offenders


def verify_fixtures(gallery=None, fixtures=None) -> FixtureCheck:
    """Recompute every golden value and compare with the committed fixtures."""
    gallery = Path(gallery) if gallery is not None else gallery_dir()
    fixtures = Path(fixtures) if fixtures is not None else fixtures_dir()
    result = FixtureCheck()
    names = gallery_names(gallery)
    for name in names:
        path = fixtures / f"{name}.json"
        if not path.exists():
            result.offenders[name] = ["missing fixture"]
            continue
        try:
            expected = json.loads(path.read_text(encoding="utf-8"))
            actual = json.loads(dumps_json(fixture_payload(gallery_model(name, gallery))))
        except (ValueError, ModelError) as exc:
            result.offenders[name] = [f"unreadable: {exc}"]
            continue
        problems: list[str] = []
        _diff(expected, actual, name, problems)
        if problems:
            result.offenders[name] = problems
        result.checked.append(name)
    for path in sorted(fixtures.glob("*.json")):
        if path.stem not in names:
            result.offenders[path.stem] = ["fixture without gallery model"]
    return result
