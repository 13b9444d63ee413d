"""Constants for the credit score stacking toolkit."""

import logging

# Logging
LOGGER = logging.getLogger(__package__)

# Domain
DOMAIN = "credit_stack"

# Serialized artifacts
FORMAT_VERSION = 1
BUNDLE_FILE = "bundle.json"
CLEANING_FILE = "cleaning.json"
MANIFEST_FILE = "manifest.json"
TIMINGS_FILE = "timings.json"
MODELS_DIR = "models"

# Class codebook, in label-code order
DEFAULT_CLASS_ORDER = ("Poor", "Standard", "Good")
DEFAULT_LABEL_COLUMN = "Credit_Score"

# Preprocessing defaults
DEFAULT_Z_THRESHOLD = 3.0
DEFAULT_IQR_MULTIPLIER = 1.5
DEFAULT_TEST_FRACTION = 0.2

# Resampling defaults
DEFAULT_SMOTE_K = 5
DEFAULT_ENN_K = 3

# Stacking defaults
DEFAULT_N_FOLDS = 5
ENSEMBLE_MODEL_NAME = "Ensemble Model"
SOFT_VOTE_MODEL_NAME = "Soft Vote"

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3
