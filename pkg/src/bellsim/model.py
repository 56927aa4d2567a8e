"""Locally causal hidden-variable models over finite spaces.

A model has a source emitting ``(l1, l2)`` (possibly dependent, never
setting-dependent), instrument variables ``lx``, ``ly`` whose distribution may
depend on the local setting ("model1": ``p_x(lx) p_y(ly)``) or on the pair of
settings ("model3": ``p_xy(lx, ly)``), and response tables ``A[x](l1, lx)`` and
``B[y](l2, ly)`` with values in {-1, 0, +1}.  Settings are labelled 1 and 2;
arrays are indexed by ``setting - 1``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .rng import categorical

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

NORM_TOL = 1e-12
DEFAULT_BUDGET = 10**8
MODEL1 = "model1"
MODEL3 = "model3"
SETTING_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


class ModelError(ValueError):
    """Raised for malformed model files or models rejected by validation."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SupportSpec:
    n_lambda1: int
    n_lambda2: int
    n_lambdax: int
    n_lambday: int

    @property
    def lambda12_size(self) -> int:
        return self.n_lambda1 * self.n_lambda2

    @property
    def states_per_pair(self) -> int:
        """Size of Lambda_12 x Lambda_x x Lambda_y for one setting pair."""
        return self.lambda12_size * self.n_lambdax * self.n_lambday


@dataclass(frozen=True, eq=False)
class InstrumentDistribution:
    """Instrument hidden-variable distribution.

    ``model1`` stores ``px`` with shape (2, nx) and ``py`` with shape (2, ny);
    ``model3`` stores ``pxy`` with shape (2, 2, nx, ny).
    """

    variant: str
    px: np.ndarray | None = None
    py: np.ndarray | None = None
    pxy: np.ndarray | None = None

    def __post_init__(self):
        for name in ("px", "py", "pxy"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value, np.float64))

    def joint(self, x: int, y: int) -> np.ndarray:
        """Joint distribution of ``(lx, ly)`` for settings ``(x, y)``."""
        if self.variant == MODEL1:
            return np.outer(self.px[x - 1], self.py[y - 1])
        return self.pxy[x - 1, y - 1]


@dataclass(frozen=True, eq=False)
class ResponseFunction:
    """``A`` has shape (2, n1, nx), ``B`` has shape (2, n2, ny)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A, np.int8))
        object.__setattr__(self, "B", _frozen(self.B, np.int8))


@dataclass(frozen=True, eq=False)
class HvModel:
    name: str
    support: SupportSpec
    source: np.ndarray
    instruments: InstrumentDistribution
    responses: ResponseFunction
    description: str = ""
    content_hash: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "source", _frozen(self.source, np.float64))

    @property
    def variant(self) -> str:
        return self.instruments.variant

    def has_zeros(self) -> bool:
        return bool((self.responses.A == 0).any() or (self.responses.B == 0).any())


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_distribution(p: np.ndarray, label: str, out: list[str]) -> None:
    if not np.all(np.isfinite(p)) or (p < 0).any():
        out.append(f"{label} has negative or non-finite entries")
    if abs(float(np.sum(p)) - 1.0) > NORM_TOL:
        out.append(f"{label} not normalized (sum = {float(np.sum(p))!r})")


def validate_model(model: HvModel) -> ValidationReport:
    """Check every model invariant; never raises."""
    out: list[str] = []
    s = model.support
    if min(s.n_lambda1, s.n_lambda2, s.n_lambdax, s.n_lambday) < 1:
        out.append("support sizes must be >= 1")
        return ValidationReport(out)

    if model.source.shape != (s.n_lambda1, s.n_lambda2):
        out.append(f"source shape {model.source.shape} != {(s.n_lambda1, s.n_lambda2)}")
    else:
        _check_distribution(model.source, "source", out)

    inst = model.instruments
    if inst.variant == MODEL1:
        if inst.px is None or inst.px.shape != (2, s.n_lambdax):
            out.append(f"px must have shape {(2, s.n_lambdax)}")
        else:
            for x in (1, 2):
                _check_distribution(inst.px[x - 1], f"p_x[{x}]", out)
        if inst.py is None or inst.py.shape != (2, s.n_lambday):
            out.append(f"py must have shape {(2, s.n_lambday)}")
        else:
            for y in (1, 2):
                _check_distribution(inst.py[y - 1], f"p_y[{y}]", out)
    elif inst.variant == MODEL3:
        if inst.pxy is None or inst.pxy.shape != (2, 2, s.n_lambdax, s.n_lambday):
            out.append(f"pxy must have shape {(2, 2, s.n_lambdax, s.n_lambday)}")
        else:
            for x, y in SETTING_PAIRS:
                _check_distribution(inst.pxy[x - 1, y - 1], f"p_xy[{x}{y}]", out)
    else:
        out.append(f"unknown instrument variant {inst.variant!r}")

    A, B = model.responses.A, model.responses.B
    if A.shape != (2, s.n_lambda1, s.n_lambdax):
        out.append(f"A shape {A.shape} != {(2, s.n_lambda1, s.n_lambdax)}")
    if B.shape != (2, s.n_lambda2, s.n_lambday):
        out.append(f"B shape {B.shape} != {(2, s.n_lambda2, s.n_lambday)}")
    for label, table in (("A", A), ("B", B)):
        if not np.isin(table, (-1, 0, 1)).all():
            out.append(f"response table {label} has values outside {{-1, 0, +1}}")
    if inst.variant == MODEL3 and model.has_zeros():
        out.append("CbD outcomes must be ±1 (model3 response tables contain 0)")
    return ValidationReport(out)


def check_model(model: HvModel) -> HvModel:
    report = validate_model(model)
    if not report.ok:
        raise ModelError(f"model {model.name!r} is invalid: " + "; ".join(report.violations))
    return model


def to_model3(model: HvModel) -> HvModel:
    """Embed a model1 model as model3 with ``p_xy = p_x (x) p_y``."""
    if model.variant == MODEL3:
        return model
    pxy = np.array([[model.instruments.joint(x, y) for y in (1, 2)] for x in (1, 2)])
    return HvModel(
        name=model.name + "_as_model3",
        support=model.support,
        source=model.source,
        instruments=InstrumentDistribution(MODEL3, pxy=pxy),
        responses=model.responses,
        description=model.description,
    )


# --- sampling and evaluation -------------------------------------------------


def sample_states(model: HvModel, x, y, u_source, u_inst_a, u_inst_b):
    """Map uniforms to hidden states for trials with settings ``x``, ``y``.

    Source and instrument draws use separate uniforms, so they are independent.
    Model3 draws ``(lx, ly)`` jointly from ``u_inst_a``; ``u_inst_b`` is unused.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    s = model.support
    flat = categorical(np.asarray(u_source), model.source.ravel())
    l1, l2 = np.divmod(flat, s.n_lambda2)
    lx = np.zeros(x.shape, dtype=np.int64)
    ly = np.zeros(y.shape, dtype=np.int64)
    inst = model.instruments
    if inst.variant == MODEL1:
        for k in (1, 2):
            m = x == k
            lx[m] = categorical(np.asarray(u_inst_a)[m], inst.px[k - 1])
            m = y == k
            ly[m] = categorical(np.asarray(u_inst_b)[m], inst.py[k - 1])
    else:
        for i, j in SETTING_PAIRS:
            m = (x == i) & (y == j)
            joint = categorical(np.asarray(u_inst_a)[m], inst.pxy[i - 1, j - 1].ravel())
            lx[m], ly[m] = np.divmod(joint, s.n_lambday)
    return l1, l2, lx, ly


def sample_trial_state(model: HvModel, setting: tuple[int, int], rng: np.random.Generator):
    """Draw one ``(l1, l2, lx, ly)`` for the given setting pair."""
    x, y = setting
    u = rng.random(3)
    l1, l2, lx, ly = sample_states(model, np.array([x]), np.array([y]), u[:1], u[1:2], u[2:3])
    return int(l1[0]), int(l2[0]), int(lx[0]), int(ly[0])


def outcomes(model: HvModel, x, y, l1, l2, lx, ly):
    """Vectorized table lookup: ``a = A[x](l1, lx)``, ``b = B[y](l2, ly)``."""
    a = model.responses.A[np.asarray(x) - 1, l1, lx]
    b = model.responses.B[np.asarray(y) - 1, l2, ly]
    return a, b


def evaluate_outcomes(model: HvModel, state, setting: tuple[int, int]) -> tuple[int, int]:
    l1, l2, lx, ly = state
    x, y = setting
    s = model.support
    if not (0 <= l1 < s.n_lambda1 and 0 <= l2 < s.n_lambda2
            and 0 <= lx < s.n_lambdax and 0 <= ly < s.n_lambday):
        raise IndexError(f"state {state} outside support {s}")
    if x not in (1, 2) or y not in (1, 2):
        raise IndexError(f"setting pair {setting} not in {{1,2}}x{{1,2}}")
    return int(model.responses.A[x - 1, l1, lx]), int(model.responses.B[y - 1, l2, ly])


# --- model files ---------------------------------------------------------------

_TOP_KEYS = {"name", "description", "variant", "support", "source", "instruments", "responses"}
_SUPPORT_KEYS = {"lambda1", "lambda2", "lambdax", "lambday"}
_INSTRUMENT_KEYS = {MODEL1: {"px1", "px2", "py1", "py2"}, MODEL3: {"p11", "p12", "p21", "p22"}}
_RESPONSE_KEYS = {"A1", "A2", "B1", "B2"}


def _number(v) -> float:
    if isinstance(v, bool):
        raise ModelError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"cannot parse probability {v!r}") from exc
    raise ModelError(f"expected a number, got {v!r}")


def _table(v, shape: tuple[int, ...], label: str, convert=_number) -> np.ndarray:
    try:
        arr = np.array([[convert(c) for c in row] for row in v] if len(shape) == 2
                       else [convert(c) for c in v])
    except TypeError as exc:
        raise ModelError(f"{label}: malformed table") from exc
    if arr.shape != shape:
        raise ModelError(f"{label}: expected shape {shape}, got {arr.shape}")
    return arr


def _outcome(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelError(f"response entries must be integers, got {v!r}")
    return v


def _reject_unknown(section: dict, allowed: set[str], label: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ModelError(f"unknown field(s) in {label}: {', '.join(sorted(unknown))}")
    missing = allowed - set(section)
    if missing:
        raise ModelError(f"missing field(s) in {label}: {', '.join(sorted(missing))}")


def model_from_dict(doc: dict[str, Any], content_hash: str = "") -> HvModel:
    """Build (and validate) a model from a parsed model document."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ModelError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    for key in ("name", "variant", "support", "source", "instruments", "responses"):
        if key not in doc:
            raise ModelError(f"missing top-level field {key!r}")
    variant = doc["variant"]
    if variant not in (MODEL1, MODEL3):
        raise ModelError(f"variant must be {MODEL1!r} or {MODEL3!r}, got {variant!r}")

    sup = doc["support"]
    _reject_unknown(sup, _SUPPORT_KEYS, "[support]")
    sizes = {}
    for k in ("lambda1", "lambda2", "lambdax", "lambday"):
        v = sup[k]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ModelError(f"support.{k} must be a positive integer, got {v!r}")
        sizes[k] = v
    support = SupportSpec(sizes["lambda1"], sizes["lambda2"], sizes["lambdax"], sizes["lambday"])
    n1, n2, nx, ny = support.n_lambda1, support.n_lambda2, support.n_lambdax, support.n_lambday

    src = doc["source"]
    _reject_unknown(src, {"p"}, "[source]")
    source = _table(src["p"], (n1, n2), "source.p")

    inst_doc = doc["instruments"]
    _reject_unknown(inst_doc, _INSTRUMENT_KEYS[variant], "[instruments]")
    if variant == MODEL1:
        px = np.array([_table(inst_doc[f"px{k}"], (nx,), f"instruments.px{k}") for k in (1, 2)])
        py = np.array([_table(inst_doc[f"py{k}"], (ny,), f"instruments.py{k}") for k in (1, 2)])
        instruments = InstrumentDistribution(MODEL1, px=px, py=py)
    else:
        pxy = np.array([[_table(inst_doc[f"p{x}{y}"], (nx, ny), f"instruments.p{x}{y}")
                         for y in (1, 2)] for x in (1, 2)])
        instruments = InstrumentDistribution(MODEL3, pxy=pxy)

    resp = doc["responses"]
    _reject_unknown(resp, _RESPONSE_KEYS, "[responses]")
    A = np.array([_table(resp[f"A{k}"], (n1, nx), f"responses.A{k}", _outcome) for k in (1, 2)])
    B = np.array([_table(resp[f"B{k}"], (n2, ny), f"responses.B{k}", _outcome) for k in (1, 2)])
    if not (np.isin(A, (-1, 0, 1)).all() and np.isin(B, (-1, 0, 1)).all()):
        raise ModelError("response tables must contain only -1, 0, +1")

    model = HvModel(
        name=str(doc["name"]),
        support=support,
        source=source,
        instruments=instruments,
        responses=ResponseFunction(A, B),
        description=str(doc.get("description", "")),
        content_hash=content_hash,
    )
    return check_model(model)


def loads_model(text: str) -> HvModel:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"not a valid model file: {exc}") from exc
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return model_from_dict(doc, content_hash=digest)


def load_model(path) -> HvModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    return loads_model(text)


def gallery_dir() -> Path:
    return Path(str(resources.files("bellsim") / "gallery"))


def gallery_names(directory=None) -> list[str]:
    d = Path(directory) if directory is not None else gallery_dir()
    return sorted(p.stem for p in d.glob("*.toml"))


def gallery_model(name: str, directory=None) -> HvModel:
    d = Path(directory) if directory is not None else gallery_dir()
    path = d / f"{name}.toml"
    if not path.exists():
        raise ModelError(f"no gallery model named {name!r} (have: {', '.join(gallery_names(d))})")
    return load_model(path)


def resolve_model(ref: str) -> HvModel:
    """Load ``gallery/<name>`` from the bundled gallery, anything else as a path."""
    if ref.startswith("gallery/") and not Path(ref).exists():
        return gallery_model(ref.split("/", 1)[1].removesuffix(".toml"))
    return load_model(ref)
