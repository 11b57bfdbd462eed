import math
import os
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, MissingInputError, UndefinedInputError


class Mode(str, Enum):
    KL = 'kl'
    IL = 'il'
    L = 'l'


class Command(str, Enum):
    SIMULATE = 'simulate'
    FIT = 'fit'
    EVALUATE = 'evaluate'
    EXPORT_PLOTS = 'export-plots'


class FitMethod(str, Enum):
    PF2X2 = 'pf2x2'
    FLEX_L = 'flex-l'


class FitStatus(str, Enum):
    CONVERGED = 'converged'
    MAX_ITERS = 'max_iters'


# (nonneg_B, nonneg_A, nonneg_D) per --nonneg flag
NONNEG_FLAGS = {
    'none': (False, False, False),
    'd': (False, False, True),
    'bd': (True, False, True),
    'bda': (True, True, True),
}


def _frozen_array(values):
    arr = np.array(values, dtype=np.float64, order='C')
    arr.flags.writeable = False
    return arr


# ============ TENSORS ============

@dataclass(frozen=True)
class DenseTensor4:
    """Raw 4-way data cube indexed (acquisition i, mass channel j, modulation k, sample l)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4:
            raise DimensionError(f'Expected a 4-way array, got {data.ndim} dims')
        if min(data.shape) < 1:
            raise DimensionError(f'All dims must be >= 1, got {data.shape}')
        data = _frozen_array(data)
        if not np.isfinite(data).all():
            raise UndefinedInputError('Tensor contains non-finite entries')
        object.__setattr__(self, 'data', data)

    @property
    def dims(self):
        return self.data.shape

    @property
    def norm_sq(self):
        return float(np.vdot(self.data, self.data))


@dataclass(frozen=True)
class SliceSet:
    """Ordered slices of one unfolding, stacked as an (H, m, J) array."""
    mode: Mode
    slices: np.ndarray
    index_map: tuple
    dims: tuple

    def __post_init__(self):
        slices = np.asarray(self.slices)
        if slices.ndim != 3:
            raise DimensionError(f'Slices must be stacked as (H, m, J), got shape {slices.shape}')
        if len(self.index_map) != slices.shape[0]:
            raise DimensionError(
                f'index_map has {len(self.index_map)} entries for {slices.shape[0]} slices')
        object.__setattr__(self, 'mode', Mode(self.mode))
        object.__setattr__(self, 'slices', _frozen_array(slices))
        object.__setattr__(self, 'index_map', tuple(tuple(ix) for ix in self.index_map))
        object.__setattr__(self, 'dims', tuple(int(d) for d in self.dims))

    def __len__(self):
        return self.slices.shape[0]

    def __getitem__(self, h):
        return self.slices[h]

    @property
    def norms_sq(self):
        return np.einsum('hmj,hmj->h', self.slices, self.slices)


@dataclass(frozen=True)
class TruncatedSVD:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


# ============ FLEXIBLE COUPLING ============

@dataclass(frozen=True)
class FlexConfig:
    R: int
    nonneg_B: bool = False
    nonneg_A: bool = False
    nonneg_D: bool = True
    mu_growth: float = 1.05
    growth_iters: int = 10
    eps: float = 2.5e-6
    max_iters: int = 500
    seed: int = 0
    mu_floor: float = 1e-10

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError(f'R must be >= 1, got {self.R}')
        if self.mu_growth < 1:
            raise ConfigError(f'mu_growth must be >= 1, got {self.mu_growth}')
        if not self.eps > 0:
            raise ConfigError(f'eps must be > 0, got {self.eps}')
        if self.max_iters < 1:
            raise ConfigError(f'max_iters must be >= 1, got {self.max_iters}')
        if self.growth_iters < 0:
            raise ConfigError(f'growth_iters must be >= 0, got {self.growth_iters}')
        if self.mu_floor < 0:
            raise ConfigError(f'mu_floor must be >= 0, got {self.mu_floor}')


@dataclass
class FlexState:
    """Factors of one flexible-coupling PARAFAC2 model; per-slice factors are stacked on axis 0."""
    B: np.ndarray       # (H, m, R)
    A: np.ndarray       # (J, R)
    Bstar: np.ndarray   # (R, R)
    P: np.ndarray       # (H, m, R)
    D: np.ndarray       # (H, R)
    mu: np.ndarray      # (H,)
    iter: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def rank(self):
        return self.A.shape[1]


# ============ COUPLED MODEL ============

@dataclass(frozen=True)
class CoupledConfig:
    flex: FlexConfig
    omega: float = 3.0
    n_starts: int = 10
    burn_iters: int = 80
    seed: int = 0
    mu_A: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if self.n_starts < 1:
            raise ConfigError(f'n_starts must be >= 1, got {self.n_starts}')
        if self.burn_iters < 1:
            raise ConfigError(f'burn_iters must be >= 1, got {self.burn_iters}')
        if self.mu_A is not None and self.mu_A < 0:
            raise ConfigError(f'mu_A must be >= 0, got {self.mu_A}')
        if self.threads < 1:
            raise ConfigError(f'threads must be >= 1, got {self.threads}')


@dataclass
class StartSummary:
    index: int
    seed: int
    sigma: Optional[float] = None
    diverged: bool = False
    message: str = ''


@dataclass
class FitReport:
    objective_trace: list = field(default_factory=list)
    percent_var: Optional[float] = None
    iterations: int = 0
    wall_time_s: float = 0.0
    per_start: list = field(default_factory=list)
    selected_start: Optional[int] = None
    mu_A_final: Optional[float] = None
    converged: bool = False
    trace_kl: list = field(default_factory=list)
    trace_il: list = field(default_factory=list)
    percent_var_kl: Optional[float] = None
    percent_var_il: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def status(self):
        return FitStatus.CONVERGED if self.converged else FitStatus.MAX_ITERS

    def to_dict(self):
        report = asdict(self)
        report['status'] = self.status.value
        return report


@dataclass
class CoupledModel:
    """Two coupled unfolding models while fitting; F, D_samples and A_final once assembled."""
    state_kl: Optional[FlexState] = None
    state_il: Optional[FlexState] = None
    mu_A: float = 0.0
    F: Optional[np.ndarray] = None              # (I, R, K, L)
    D_samples: Optional[np.ndarray] = None      # (L, R)
    A_final: Optional[np.ndarray] = None        # (J, R)
    report: FitReport = field(default_factory=FitReport)
    method: FitMethod = FitMethod.PF2X2
    iter: int = 0

    @property
    def rank(self):
        if self.A_final is not None:
            return self.A_final.shape[1]
        return self.state_kl.rank

    @property
    def dims(self):
        I, _, K, L = self.F.shape
        return (I, self.A_final.shape[0], K, L)


# ============ SYNTHETIC DATA ============

@dataclass(frozen=True)
class SynthConfig:
    I: int = 200
    J: int = 45
    K: int = 16
    L: int = 3
    R: int = 2
    drift1_max: float = 1.5
    drift2_max: float = 25.0
    sigma1: float = 1.5
    sigma2: float = 20.0
    snr: float = 500.0
    offset_factor: float = 6.0
    scale: float = 1e4
    n_ms_peaks: int = 45
    apex_spacing: float = 1.0
    amounts: Optional[tuple] = None
    seed: int = 0

    def validate(self):
        """Raise ConfigError on invalid settings; return a list of non-fatal warnings."""
        for name in ('I', 'J', 'K', 'L', 'R'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be >= 1, got {getattr(self, name)}')
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ConfigError(f'Peak widths must be > 0, got {self.sigma1}, {self.sigma2}')
        if not self.snr > 0:
            raise ConfigError(f'snr must be > 0, got {self.snr}')
        if self.drift1_max < 0 or self.drift2_max < 0:
            raise ConfigError('Drift bounds must be >= 0')
        if self.offset_factor < 0 or self.scale <= 0:
            raise ConfigError('offset_factor must be >= 0 and scale > 0')
        if not 1 <= self.n_ms_peaks <= self.J:
            raise ConfigError(f'n_ms_peaks must lie in [1, J={self.J}], got {self.n_ms_peaks}')
        if self.amounts is not None:
            amounts = np.asarray(self.amounts, dtype=float)
            if amounts.shape != (self.L, self.R):
                raise ConfigError(f'amounts must be L x R = {(self.L, self.R)}, got {amounts.shape}')
            if (amounts < 0).any() or not amounts.any():
                raise ConfigError('amounts must be non-negative and not all zero')

        warnings = []
        if self.I <= 2 * self.drift2_max + 6 * self.sigma2:
            warnings.append(
                f'I={self.I} is small for drift2_max={self.drift2_max} and sigma2={self.sigma2}; '
                f'peaks may be truncated (recommended I > {2 * self.drift2_max + 6 * self.sigma2:g})')
        if self.K <= 2 * self.drift1_max + 6 * self.sigma1:
            warnings.append(
                f'K={self.K} is small for drift1_max={self.drift1_max} and sigma1={self.sigma1}; '
                f'peaks may be truncated (recommended K > {2 * self.drift1_max + 6 * self.sigma1:g})')
        return warnings

    @property
    def noiseless(self):
        return math.isinf(self.snr)


@dataclass
class GroundTruth:
    spectra: np.ndarray         # (J, R) unit columns
    score_maps: np.ndarray      # (I, K, R, L) unscaled elution surfaces
    abundances: np.ndarray      # (L, R)
    drifts: np.ndarray          # (L, R, 2): first-dimension, second-dimension
    apexes: np.ndarray          # (L, R, 2)
    config: Optional[SynthConfig] = None


# ============ METRICS ============

@dataclass(frozen=True)
class MatchResult:
    permutation: tuple
    per_component_cosines: np.ndarray
    mean_cosine: float


# ============ RUNS ============

@dataclass
class RunConfig:
    command: Command
    output_path: str
    input_path: Optional[str] = None
    model_path: Optional[str] = None
    truth_path: Optional[str] = None
    amounts_path: Optional[str] = None
    spectra_path: Optional[str] = None
    config_path: Optional[str] = None
    payload: object = None
    R: Optional[int] = None
    method: FitMethod = FitMethod.PF2X2
    verbose: bool = False

    def validate_paths(self):
        """Check every input before any computation starts."""
        for label, path in (('input', self.input_path), ('truth', self.truth_path),
                            ('amounts', self.amounts_path), ('spectra', self.spectra_path),
                            ('config', self.config_path)):
            if path is not None and not os.path.isfile(path):
                raise MissingInputError(f'{label} file not found: {path}')
        if self.model_path is not None and not os.path.isdir(self.model_path):
            raise MissingInputError(f'model directory not found: {self.model_path}')
        if self.output_path and os.path.isfile(self.output_path):
            raise ConfigError(f'output must be a directory, found a file: {self.output_path}')
