# Default preprocessing settings
DEFAULT_PREPROCESS_SETTINGS = {
    "MAX_MISSING_FRACTION": 0.7,
    "MAX_CATEGORIES": 10,
    "TOP_CATEGORIES": 9,
    "OTHER_LABEL": "Other",
    "MISSING_LABEL": "Missing",
    "MISSING_MARKERS": ["", "NA"],
    "SPLIT_RATIOS": (0.6, 0.2, 0.2),
    "CONSTANT_STD": 1e-12,
}

# Default graph estimation settings
DEFAULT_GRAPH_SETTINGS = {
    "METHOD": "spearman",
    "METHODS": ["pearson", "spearman", "mutual_information", "chow_liu", "notears"],
    "MAX_BINS": 32,
    "DIRECTED_IMPORT": False,
}

# NOTEARS settings (L2 loss, augmented Lagrangian)
DEFAULT_NOTEARS_SETTINGS = {
    "LAMBDA1": 0.1,
    "LAMBDA_GRID": [0.01, 0.05, 0.1, 0.2],
    "MAX_ITER": 100,
    "H_TOL": 1e-8,
    "RHO_MAX": 1e16,
    "W_THRESHOLD": 0.3,
    "HOLDOUT_FRACTION": 0.2,
}

# Laplacian / positional encoding settings
DEFAULT_SPECTRAL_SETTINGS = {
    "LAPLACIAN": "normalized",
    "K": "auto",
    "TAU_LOW": 0.75,
    "TAU_HIGH": 1.25,
    "MIN_K": 2,
    "MAX_K": 10,
    "GAP_FACTOR": 2.0,
    "MIN_GAP_CANDIDATES": 4,
    "ALPHA": 1.0,
}

# FT-Transformer style model settings
DEFAULT_MODEL_SETTINGS = {
    "TOTAL_TOKEN_DIM": 192,
    "N_LAYERS": 3,
    "N_HEADS": 8,
    "FFN_FACTOR": 4 / 3,
    "ATTENTION_DROPOUT": 0.2,
    "FFN_DROPOUT": 0.1,
    "RESIDUAL_DROPOUT": 0.0,
    "PE_MODE": "fixed",
    "LEARNABLE_PE_STD": 0.02,
}

# Training settings (desk-scale defaults)
DEFAULT_TRAINING_SETTINGS = {
    "LEARNING_RATE": 1e-4,
    "WEIGHT_DECAY": 1e-5,
    "BATCH_SIZE": 32,
    "MAX_EPOCHS": 50,
    "PATIENCE": 20,
    "MIN_EPOCHS": 10,
    "MIN_DELTA": 1e-6,
}

# Sweep settings for rank / alpha experiments
DEFAULT_SWEEP_SETTINGS = {
    "MAX_WORKERS": 4,
    "TOTAL_TOKEN_DIM": 64,
    "N_SAMPLES_THEORY": 500,
    "FORWARD_ONLY": False,
    "REGIME_PARTITIONS": [4, 15, 25],
}

# Synthetic generator settings
DEFAULT_SYNTHETIC_SETTINGS = {
    "D": 30,
    "K": 4,
    "N": 2000,
    "NOISE_STD": 0.1,
    "LATENT_RANGE": (-2.0, 2.0),
    "WEIGHT_RANGE": (-1.0, 1.0),
    "TARGET_GROUP": 0,
}

DEFAULT_SEEDS = [1, 2, 3, 4, 5]

# Validation grid for alpha selection: 9 values spanning [0.05, 10]
ALPHA_GRID = [0.05, 0.1, 0.25, 0.5, 1, 2, 3, 5, 10]

# Desk-scale alpha grid for effective-rank sweeps
RANK_ALPHA_GRID = [0, 1, 2, 3, 5, 10, 20, 30]

LOGGING_SETTINGS = {
    "FORMAT": "%(asctime)s %(levelname)s %(name)s: %(message)s",
    "LEVEL": "INFO",
}

OUTPUT_ROOT_ENV = "TABPET_OUTPUT_ROOT"

# File names of persisted pipeline artifacts
ARTIFACT_NAMES = {
    "TABLE": "table.csv",
    "GRAPH": "graph.csv",
    "DIAGNOSTICS": "graph_diagnostics.json",
    "SPECTRUM": "spectrum.csv",
    "PE": "pe.csv",
    "CHECKPOINT": "model",
    "METRICS": "metrics.csv",
    "REPORT": "report.csv",
    "MANIFEST": "manifest.json",
}

# Session state keys
SESSION_KEYS = {
    "RAW_TABLE": "raw_table",
    "PREPARED_DATA": "prepared_data",
    "FEATURE_GRAPH": "feature_graph",
    "GRAPH_DIAGNOSTICS": "graph_diagnostics",
    "PE_MATRIX": "pe_matrix",
    "SPECTRUM": "spectrum",
    "TRAINING_RESULTS": "training_results",
    "RANK_REPORT": "rank_report",
}
