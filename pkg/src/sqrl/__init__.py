"""Similarity-quantized relative learning for molecular activity prediction.

Turns (molecule, activity) tables into similarity-thresholded pair datasets,
trains relative-difference regressors over fingerprint features, predicts by
nearest-neighbor anchoring, and evaluates with MAE / Spearman metrics,
threshold sweeps, and activity-cliff subsets.
"""

__version__ = "0.1.0"
