"""Gaussian discriminant classifiers with low-rank covariance updates and attention-based drift compensation."""

from ._lrgda import (
    InputError,
    NumericalError,
    StatsRegistry,
    RegularizationParams,
    HopdcConfig,
    LinearClassifier,
    RgdaClassifier,
    LrRgdaClassifier,
    build_lda,
    build_rgda,
    build_lr_rgda,
    regularize_covariance,
    low_rank_factor,
    woodbury_inverse,
    log_det_lemma,
    topk_softmax,
    estimate_drift,
    hopfield_energy,
    hopfield_update,
    storage_layout,
    simulate,
    derive_seed,
)

__all__ = [name for name in dir() if not name.startswith("_")]
