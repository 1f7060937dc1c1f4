"""
Fixture sizes and constants shared by the test suite.
"""
# small synthetic fixture used by most module tests: 3 meta-classes x 4 classes, 3-d features
SMALL_SPEC = {
    'n_meta': 3,
    'classes_per_meta': 4,
    'samples_per_class': 40,
    'd': 3,
    'kappa0': 0.1,
    'kappa1': 10.,
    'seed': 7,
    'attr_noise': 0.01,
    'val_per_meta': 1,
}

# the desk-scale acceptance fixture
STANDARD_SPEC = {
    'n_meta': 5,
    'classes_per_meta': 4,
    'samples_per_class': 100,
    'd': 10,
    'kappa0': 0.05,
    'kappa1': 20.,
    'seed': 2019,
    'attr_noise': 0.1,
    'val_per_meta': 1,
}

# Monte-Carlo oracle settings
ORACLE_FIXTURES = 5
ORACLE_DRAWS = 200_000
ACCEPTANCE_ORACLE_FIXTURES = 20
ACCEPTANCE_ORACLE_DRAWS = 1_000_000

# property loops
PROPERTY_CASES = 1000
