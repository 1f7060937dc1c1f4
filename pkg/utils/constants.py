# ==== bundle / model file format ====
FEATURES_MAGIC = b'BZSLF1\x00\x00'
ATTRIBUTES_MAGIC = b'BZSLA1\x00\x00'
MODEL_MAGIC = b'BZSLM1\x00\x00'
MODEL_FORMAT_VERSION = 1

FEATURES_FILE = 'features.bin'
ATTRIBUTES_FILE = 'attributes.bin'
LABELS_FILE = 'labels.txt'
SPLITS_FILE = 'splits.json'
CLASSES_FILE = 'classes.txt'
TRUTH_FILE = 'truth.json'

# ==== model ====
VARIANTS = ('unconstrained', 'constrained', 'ablation_v1', 'ablation_v2', 'ablation_flat')
SEARCH_SPACES = ('gzsl', 'zsl_unseen_only', 'seen_only')
SIGMA0_SOURCES = ('covariance', 'scatter')
ATTR_NORMS = ('none', 'l2')

DEFAULT_PCA_DIM = 500
DEFAULT_KAPPA0 = 0.1
DEFAULT_KAPPA1 = 10.
DEFAULT_S = 1.
DEFAULT_K = 2

V1_REGULARIZATION = 1e-6  # eps = V1_REGULARIZATION * trace(cov) / D
V2_KAPPA1 = 1e-3

# ==== evaluation / tuning ====
VALIDATION_HOLDOUT = 0.2
DEFAULT_TOPK = (1,)

# m entries are resolved against the post-PCA dimension D: "D+2", "5D", "25D"
DEFAULT_GRID = {
    'kappa0': [0.01, 0.1, 1.],
    'kappa1': [1., 5., 10., 25.],
    'm': ['D+2', '5D', '25D'],
    's': [1., 5., 10.],
    'K': [1, 2, 3, 5, 10],
}
HYPERPARAM_ORDER = ('kappa0', 'kappa1', 'm', 's', 'K', 'a0', 'b0')

# ==== synthetic data / oracles ====
MIN_MC_DRAWS = 100_000
MC_CHUNK = 100_000
MAX_ORACLE_DIM = 2
