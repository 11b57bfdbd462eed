import os


class Config:
    # Logging and parallelism
    LOG_LEVEL = os.environ.get('DRIFTDECOMP_LOG_LEVEL') or 'INFO'
    THREADS = int(os.environ.get('DRIFTDECOMP_THREADS') or os.cpu_count() or 1)

    # Version of the --config JSON schema
    CONFIG_SCHEMA_VERSION = 1

    # Fit settings
    FIT_METHOD = 'pf2x2'
    FIT_RANK = 2
    FIT_SEED = 0
    FIT_N_STARTS = 10
    FIT_BURN_ITERS = 80
    FIT_MAX_ITERS = 500
    FIT_EPS = 2.5e-6
    FIT_OMEGA = 3.0
    FIT_MU_A = None  # None derives the spectral coupling from the random start
    FIT_MU_GROWTH = 1.05
    FIT_GROWTH_ITERS = 10
    FIT_MU_FLOOR = 1e-10
    FIT_NONNEG = 'd'

    # Synthetic data settings
    SYNTH_I = 200
    SYNTH_J = 45
    SYNTH_K = 16
    SYNTH_L = 3
    SYNTH_R = 2
    SYNTH_DRIFT1_MAX = 1.5
    SYNTH_DRIFT2_MAX = 25.0
    SYNTH_SIGMA1 = 1.5
    SYNTH_SIGMA2 = 20.0
    SYNTH_SNR = 500.0
    SYNTH_OFFSET_FACTOR = 6.0
    SYNTH_SCALE = 1e4
    SYNTH_N_MS_PEAKS = 45
    SYNTH_APEX_SPACING = 1.0
    SYNTH_AMOUNTS = None
    SYNTH_SEED = 0
