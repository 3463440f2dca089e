from __future__ import annotations

from enum import Enum
from typing import Annotated, Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator, model_validator

from hyperlab.core import config
from hyperlab.core.errors import ConfigError


def _to_complex(v: Any) -> complex:
    if isinstance(v, complex):
        return v
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    raise ValueError(f"cannot read {v!r} as a complex number; use [re, im]")


def _from_complex(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


# Complex numbers travel as [re, im] pairs in YAML/JSON.
ComplexLike = Annotated[
    complex,
    PlainValidator(_to_complex),
    PlainSerializer(_from_complex, return_type=list),
]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- Enums ---

class SymmetryClass(str, Enum):
    COMPLEX = "complex"
    REAL = "real"


class EntryLaw(str, Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    UNIFORM = "uniform"
    CUSTOM = "custom"


class DomainShape(str, Enum):
    DISK = "disk"
    ANNULUS_SECTOR = "annulus-sector"
    RECTANGLE = "rectangle"
    HALF_PLANE_CLIPPED_DISK = "half-plane-clipped-disk"


class TestFunctionKind(str, Enum):
    MOLLIFIED_INDICATOR = "mollified-indicator"
    GAUSSIAN_BUMP = "gaussian-bump"


class FlowKind(str, Enum):
    BROWNIAN = "brownian"
    ORNSTEIN_UHLENBECK = "ornstein-uhlenbeck"


class Command(str, Enum):
    MDE = "mde"
    STAB = "stab"
    PREDICT_COV = "predict-cov"
    GIRKO_CHECK = "girko-check"
    NUMVAR = "numvar"
    TRACE_COV = "trace-cov"
    RIGIDITY = "rigidity"
    TAIL = "tail"
    OVERLAPS = "overlaps"
    DBM = "dbm"
    FLOW_CHECK = "flow-check"
    SELFTEST = "selftest"


# --- Input models ---

class EnsembleSpec(Strict):
    N: int = Field(64, ge=1, le=2048)
    symmetry_class: SymmetryClass = SymmetryClass.COMPLEX
    entry_law: EntryLaw = EntryLaw.GAUSSIAN
    mu4: Optional[float] = None  # fourth moment, custom law only
    gauss_mixing: float = Field(0.0, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _custom_needs_moment(self) -> "EnsembleSpec":
        if self.entry_law == EntryLaw.CUSTOM and (self.mu4 is None or self.mu4 < 1.0):
            raise ValueError("entry_law 'custom' requires mu4 >= 1")
        return self

    @property
    def is_real(self) -> bool:
        return self.symmetry_class == SymmetryClass.REAL

    def with_N(self, N: int) -> "EnsembleSpec":
        return self.model_copy(update={"N": int(N)})


class DomainSpec(Strict):
    """Base shape around ``center``; linear size scaled by N^-alpha at build time."""

    shape: DomainShape = DomainShape.DISK
    center: ComplexLike = 0j
    alpha: float = Field(0.0, ge=0.0, lt=0.5)
    radius: float = Field(0.5, gt=0.0)
    width: float = Field(0.6, gt=0.0)
    height: float = Field(0.4, gt=0.0)
    r_inner: float = Field(0.2, ge=0.0)
    r_outer: float = Field(0.6, gt=0.0)
    theta_start: float = 0.0
    theta_end: float = 1.5
    clip_offset: float = 0.2  # half-plane {Re(e^{-i clip_angle}(z - center)) <= clip_offset}
    clip_angle: float = 0.0

    @model_validator(mode="after")
    def _check_shape(self) -> "DomainSpec":
        if self.shape == DomainShape.ANNULUS_SECTOR:
            if self.r_inner >= self.r_outer:
                raise ValueError("annulus-sector needs r_inner < r_outer")
            if not 0.0 < self.theta_end - self.theta_start < 2 * 3.141592653589793:
                raise ValueError("annulus-sector needs 0 < theta_end - theta_start < 2 pi")
        return self


class RegimeSpec(Strict):
    """Girko eta cut-offs; unset values default to N^-10, N^-1.05, N^-0.9, N^3."""

    eta_L: Optional[float] = Field(None, ge=0.0)
    eta_0: Optional[float] = Field(None, gt=0.0)
    eta_c: Optional[float] = Field(None, gt=0.0)
    T: Optional[float] = Field(None, gt=0.0)

    def resolve(self, N: int) -> Tuple[float, float, float, float]:
        vals = (
            self.eta_L if self.eta_L is not None else float(N) ** -10,
            self.eta_0 if self.eta_0 is not None else float(N) ** -1.05,
            self.eta_c if self.eta_c is not None else float(N) ** -0.9,
            self.T if self.T is not None else float(N) ** 3,
        )
        if not vals[0] < vals[1] < vals[2] < vals[3]:
            raise ConfigError(
                "regimes must satisfy eta_L < eta_0 < eta_c < T, got "
                + ", ".join(f"{v:.3g}" for v in vals)
            )
        return vals

    @model_validator(mode="after")
    def _check_order(self) -> "RegimeSpec":
        given = [v for v in (self.eta_L, self.eta_0, self.eta_c, self.T) if v is not None]
        if any(a >= b for a, b in zip(given, given[1:])):
            raise ValueError("regimes must satisfy eta_L < eta_0 < eta_c < T")
        return self


class TestFunctionSpec(Strict):
    kind: TestFunctionKind = TestFunctionKind.MOLLIFIED_INDICATOR
    a: float = Field(0.6, ge=0.0)
    center: ComplexLike = 0j
    width: float = Field(0.15, gt=0.0)
    grid_points: int = Field(8, ge=8)  # nodes per mollification length


class GridSpec(Strict):
    z: List[ComplexLike] = Field(default_factory=lambda: [0.3 + 0j])
    z2: List[ComplexLike] = Field(default_factory=lambda: [-0.2 + 0j])
    w: List[ComplexLike] = Field(default_factory=lambda: [0.3j])
    w2: List[ComplexLike] = Field(default_factory=lambda: [0.3j])
    N: List[int] = Field(default_factory=lambda: [64, 128, 256])
    t: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    x: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.5])
    index_pairs: List[Tuple[int, int]] = Field(default_factory=lambda: [(10, 10)])

    @model_validator(mode="after")
    def _positive(self) -> "GridSpec":
        if any(n < 1 for n in self.N):
            raise ValueError("grids.N entries must be positive")
        if self.N != sorted(self.N):
            raise ValueError("grids.N must be ascending")
        return self


class RunConfig(Strict):
    command: Command = Command.SELFTEST
    ensemble: EnsembleSpec = Field(default_factory=EnsembleSpec)
    domain: DomainSpec = Field(default_factory=DomainSpec)
    test_function: TestFunctionSpec = Field(default_factory=TestFunctionSpec)
    regimes: RegimeSpec = Field(default_factory=RegimeSpec)
    grids: GridSpec = Field(default_factory=GridSpec)
    samples: int = Field(200, ge=1)
    kappa: float = Field(0.05, gt=0.0)
    bulk_fraction: float = Field(0.9, gt=0.0, le=0.9)
    t_span: float = Field(0.5, gt=0.0)
    dt: float = Field(1e-3, gt=0.0)
    flow_kind: FlowKind = FlowKind.ORNSTEIN_UHLENBECK
    trajectories: int = Field(100, ge=1)
    control: bool = False  # numvar: i.i.d. uniform points instead of eigenvalues
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
    out: str = "runs"
    workers: int = Field(default_factory=lambda: max(config.DEFAULT_WORKERS, 1), ge=1)
    z_max: float = Field(default_factory=lambda: config.Z_MAX, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _z_in_theory(self) -> "RunConfig":
        for z in list(self.grids.z) + list(self.grids.z2):
            if abs(z) > self.z_max:
                raise ValueError(f"|z| = {abs(z):.3f} exceeds z_max = {self.z_max}")
        for w in list(self.grids.w) + list(self.grids.w2):
            if w.imag <= 0:
                raise ValueError(f"spectral parameter {w} needs eta > 0")
        return self

    @property
    def base_seed(self) -> int:
        return self.seed if self.seed is not None else self.ensemble.seed


# --- Result models ---

class Estimate(BaseModel):
    name: str
    value: float
    se: float
    ci_low: float
    ci_high: float


class FitResult(BaseModel):
    slope: float
    intercept: float
    slope_se: float
    slope_ci: Tuple[float, float]
    covariance: List[List[float]]
    points: int


class ExperimentResult(BaseModel):
    experiment: str
    config_hash: str
    base_seed: int
    samples_per_cell: int
    cells: List[Dict[str, Any]] = Field(default_factory=list)
    estimates: List[Estimate] = Field(default_factory=list)
    fits: Dict[str, FitResult] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    wall_clock: float = 0.0
    version: str = ""


class CheckResult(BaseModel):
    name: str
    reference: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


class SelftestReport(BaseModel):
    checks: List[CheckResult] = Field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


class RunRecord(BaseModel):
    id: int
    timestamp: str
    command: str
    config_hash: str
    base_seed: int
    status: str
    out_dir: Optional[str] = None
    summary: Optional[str] = None
