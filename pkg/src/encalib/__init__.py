"""Post-hoc uncertainty calibration for classifier logits.

Energy-based instance-wise temperature scaling plus standard baseline
calibrators (TS, ETS, histogram binning, one-vs-all isotonic regression),
calibration metrics (ECE/MCE/SCE), OOD-detection metrics (AUROC/AUPR),
and a deterministic synthetic distribution-shift generator.

Batch hot paths run on a compiled extension when available; see
``encalib._kernels.BACKEND`` for the active backend.
"""
from encalib._kernels import BACKEND
from encalib.calibrators import (
    EnergyCalibratorParams,
    EnsembleTsParams,
    FitError,
    HistogramBinningParams,
    IsotonicOvAParams,
    TemperatureParams,
    apply_calibrator,
    apply_energy_calibrator,
    energy_fit_problem,
    fit_energy_calibrator,
    fit_ensemble_ts,
    fit_histogram_binning,
    fit_isotonic_ova,
    fit_temperature,
    load_params,
    params_from_json,
    params_to_json,
    save_params,
)
from encalib.dataset import FormatError, LogitDataset, load_csv, save_csv, split
from encalib.gaussian import GaussianPdf
from encalib.metrics import (
    BinStats,
    OodScores,
    aupr,
    auroc,
    bin_predictions,
    ece,
    mce,
    reliability_table,
    sce,
)
from encalib.scores import (
    Prediction,
    energy,
    log_sum_exp,
    nll_identity_residual,
    predict,
    tempered_softmax,
)
from encalib.synthetic import ShiftScenario, SplitMix64, generate, severity_suite

__version__ = "0.1.0"
