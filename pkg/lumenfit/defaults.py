# Input and output locations.
CLUSTERS_PATH = 'data/clusters.csv'
LIGHTS_PATH = 'data/lights.csv'
CHILDREN_PATH = 'data/children.csv'
OUTPUT_DIR = 'output'
SEED = 2014

# Merging.
RADIUS_KM = 1.5
DROP_INCOMPLETE = True

# Outcomes and regressors.
OUTCOMES = ['haz', 'whz', 'waz', 'stunted', 'wasted', 'underweight']
MAX_DEGREE = 5
REGRESSION_DEGREE = 4
COVARIATES = [
    'mother_educ_years',
    'mother_age_first_birth',
    'child_age_months',
    'wealth_poorest',
    'has_electricity',
]
CLUSTER_ROBUST = False

# Descriptive statistics and kernel smoothing.
KERNEL = 'gaussian'
BANDWIDTH = 'silverman'
KDE_GRID_POINTS = 512
GRID_POINTS = 100
LOCAL_DEGREE = 1
HIGH_LIGHT_THRESHOLD = 25.0

# Feature selection.
GBM_TREES = 200
GBM_DEPTH = 3
LEARNING_RATE = 0.1
MIN_LEAF = 5
BAGGING_TREES = 100
KNN_NEIGHBORS = 10
CV_FOLDS = 5
LIGHT_FEATURE_DEGREE = 4

# Additive model.
GAM_BASIS_DIMENSION = 10
GAM_CRITERION = 'gcv'
GAM_SCALE = None

# Spatial weights.
WEIGHT_SCHEME = 'knn'
WEIGHT_NEIGHBORS = 5
WEIGHT_CUTOFF_KM = None

# Synthetic scenario, calibrated to the published summary statistics.
SIM_CLUSTERS = 600
SIM_HOUSEHOLDS = 7
SIM_CHILDREN = 8734
SIM_YEARS = [2011, 2014]
SIM_LIGHT_MEAN = 1.62
SIM_LIGHT_SD = 3.54
SIM_LIGHT_MIN = 0.00023
SIM_LIGHT_MAX = 29.94
SIM_LIGHT_GROWTH = 0.0729
SIM_RHO = 0.3
SIM_CLUSTER_SD = 0.3
SIM_NOISE_SD = 1.2
