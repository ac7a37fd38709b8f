from .ber import run_ber, run_coded_ber, run_uncoded_ber
from .config import SNR_DEFINITION, BerRecord, ExitCurve, Link, SimConfig
from .exit import achievable_rate, measure_exit
from .io import read_ber_csv, write_ber_csv, write_manifest
from .study import StudyRow, run_prediction_study

__all__ = [
    "SNR_DEFINITION",
    "BerRecord",
    "ExitCurve",
    "Link",
    "SimConfig",
    "StudyRow",
    "achievable_rate",
    "measure_exit",
    "read_ber_csv",
    "run_ber",
    "run_coded_ber",
    "run_prediction_study",
    "run_uncoded_ber",
    "write_ber_csv",
    "write_manifest",
]
