"""Patient-specific optimal preictal period (OPP) evaluation for EEG seizure prediction.

The package turns raw multichannel EEG plus seizure annotations into a
per-patient recommendation of the preictal definition (60/45/30/15 min)
that a prediction model handles best, scored both by conventional
segment-wise metrics and by a continuous-output convergence ratio
computed from sigmoid fits of the smoothed classifier output.
"""

__version__ = "0.1.0"


class ValidationError(ValueError):
    """Bad input data or arguments; maps to CLI exit code 1."""
