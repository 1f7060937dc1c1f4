import numpy as np
import pytest
from scipy import stats

from tests.setup import ORACLE_DRAWS, ORACLE_FIXTURES
from tests.utils import random_prior, random_stats
from zsl.funcs.metaclass import build_meta_classes
from zsl.funcs.ppd import meta_posterior, seen_ppd, unseen_ppd
from zsl.funcs.synth import GenSpec, GroundTruth, bayes_oracle_accuracy, bayes_oracle_report, mc_ppd_oracle, \
    sample_dataset, sample_inverse_wishart
from zsl.models.dataset import Dataset, SplitSpec
from zsl.models.errors import InvalidArgument, InvalidDegreesOfFreedom, NotPositiveDefinite
from zsl.models.hyperparams import GlobalPrior, Hyperparams


# ==== inverse-wishart ====
def test_inverse_wishart_mean():
    psi = np.array([[2., .5], [.5, 1.]])
    draws = sample_inverse_wishart(psi, 10., np.random.default_rng(0), size=20000)
    assert draws.shape == (20000, 2, 2)
    np.testing.assert_allclose(draws.mean(axis=0), psi / (10. - 2 - 1), atol=0.01)
    # every draw is symmetric positive definite
    np.testing.assert_array_equal(draws, np.swapaxes(draws, 1, 2))
    assert np.all(np.linalg.eigvalsh(draws) > 0)


def test_inverse_wishart_single_draw():
    draw = sample_inverse_wishart(np.eye(3), 6., np.random.default_rng(1))
    assert draw.shape == (3, 3)


def test_inverse_wishart_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidDegreesOfFreedom):
        sample_inverse_wishart(np.eye(3), 2., rng)
    with pytest.raises(NotPositiveDefinite):
        sample_inverse_wishart(np.array([[1., 2.], [2., 1.]]), 5., rng)


# ==== generative model ====
def test_sample_dataset_shape(small_synthetic):
    dataset, splits, truth = small_synthetic
    assert dataset.n == 3 * 4 * 40
    assert dataset.num_classes == 12
    assert dataset.d == 3
    assert dataset.class_name(5) == "meta1_class5"
    assert splits.unseen == (3, 7, 11)
    assert splits.val_unseen == (2, 6, 10)
    assert len(splits.seen_train) == 9
    # 8 held-out rows per seen class, every row of an unseen class
    assert len(splits.test_index) == 9 * 8 + 3 * 40
    assert set(truth.meta_of.values()) == {0, 1, 2}


def test_sample_dataset_deterministic():
    spec = GenSpec(2, 3, 10, 2, 0.5, 5., seed=12)
    a, a_splits, _ = sample_dataset(spec)
    b, b_splits, _ = sample_dataset(GenSpec.from_dict(spec.to_dict()))
    assert a == b
    assert a_splits == b_splits

    c, _, _ = sample_dataset(GenSpec(2, 3, 10, 2, 0.5, 5., seed=13))
    assert not np.array_equal(a.features, c.features)


def test_sample_dataset_class_collapse():
    _, _, truth = sample_dataset(GenSpec(3, 3, 5, 2, 0.5, 1e9, seed=1))
    for c, mean in truth.class_means.items():
        np.testing.assert_allclose(mean, truth.meta_means[truth.meta_of[c]], atol=1e-2)


def test_sample_dataset_meta_collapse():
    spec = GenSpec(3, 3, 5, 2, 1e9, 5., seed=1, mu0=[4., -2.])
    _, _, truth = sample_dataset(spec)
    for mean in truth.meta_means.values():
        np.testing.assert_allclose(mean, [4., -2.], atol=1e-2)


def test_sample_dataset_dispersion_ratio():
    # the same seed reuses every normal draw, so class offsets scale by exactly sqrt(kappa1 ratio)
    _, _, loose = sample_dataset(GenSpec(2, 3, 5, 2, 0.5, 1., seed=5))
    _, _, tight = sample_dataset(GenSpec(2, 3, 5, 2, 0.5, 100., seed=5))
    for c in loose.class_means:
        j = loose.meta_of[c]
        np.testing.assert_allclose(tight.meta_means[j], loose.meta_means[j], rtol=1e-12)
        loose_offset = loose.class_means[c] - loose.meta_means[j]
        tight_offset = tight.class_means[c] - tight.meta_means[j]
        np.testing.assert_allclose(tight_offset * 10., loose_offset, rtol=1e-9, atol=1e-12)


def test_sample_dataset_consistency(small_synthetic):
    dataset, _, truth = small_synthetic
    threshold = stats.chi2.ppf(1 - 1e-6, dataset.d)
    for c, mean in truth.class_means.items():
        rows = dataset.features[dataset.labels == c].astype(float)
        cov = truth.meta_covs[truth.meta_of[c]]
        dev = rows.mean(axis=0) - mean
        assert rows.shape[0] * dev @ np.linalg.solve(cov, dev) < threshold


def test_sample_dataset_meta_class_recovery(small_synthetic):
    dataset, splits, truth = small_synthetic
    meta_map = build_meta_classes(dataset, splits, 3)
    for c in splits.unseen:
        assert {truth.meta_of[s] for s in meta_map[c]} == {truth.meta_of[c]}


def test_gen_spec_validation():
    with pytest.raises(InvalidArgument):
        GenSpec(2, 1, 10, 2, 0.5, 5.)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 2, 10, 2, 0.5, 5., val_per_meta=1)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 3, 10, 2, 0.5, 5., m=3.)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 3, 10, 2, 0., 5.)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 3, 10, 2, 0.5, 5., seed=-1)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 3, 10, 2, 0.5, 5., test_fraction=1.)
    with pytest.raises(InvalidArgument):
        GenSpec(2, 3, 10, 2, 0.5, 5., mu0=[0., 0., 0.])


def test_gen_spec_defaults():
    spec = GenSpec(2, 3, 10, 4, 0.5, 5.)
    assert spec.m == 6.
    np.testing.assert_array_equal(spec.sigma0, np.eye(4))
    assert spec.num_classes == 6
    assert spec.class_id(1, 2) == 5


def test_ground_truth_dict(tiny_synthetic):
    _, _, truth = tiny_synthetic
    again = GroundTruth.from_dict(truth.to_dict())
    assert again.to_dict() == truth.to_dict()
    assert again.spec.seed == 3


# ==== monte-carlo oracle ====
def _oracle_fixture(i):
    rng = np.random.default_rng(100 + i)
    d = 1 + i % 2
    prior = random_prior(rng, d)
    support = [random_stats(rng, d, n=20) for _ in range(2)]
    current = random_stats(rng, d, n=15) if i % 2 == 0 else None
    hp = Hyperparams(kappa0=0.5, kappa1=5., K=2)
    mp = meta_posterior(support, prior, hp, current)
    if current is not None:
        t = seen_ppd(current, mp, prior, hp).student_t
    else:
        t = unseen_ppd(mp, prior, hp).student_t
    x = t.location + 0.5 * rng.normal(size=d) * np.sqrt(np.diag(t.scale))
    return x, support, current, prior, hp, t


@pytest.mark.parametrize("i", range(ORACLE_FIXTURES))
def test_mc_oracle_matches_closed_form(i):
    x, support, current, prior, hp, t = _oracle_fixture(i)
    exact = t.logpdf(x)
    estimate, se = mc_ppd_oracle(x, support, current, prior, hp, n_draws=ORACLE_DRAWS, seed=i)
    assert se > 0
    # within 3 standard errors, and within 1% of the density
    assert abs(estimate - exact) <= 3 * se
    assert abs(np.expm1(estimate - exact)) <= 0.01


def test_mc_oracle_seed_invariance():
    x, support, current, prior, hp, _ = _oracle_fixture(0)
    e1, se1 = mc_ppd_oracle(x, support, current, prior, hp, n_draws=ORACLE_DRAWS, seed=11)
    e2, se2 = mc_ppd_oracle(x, support, current, prior, hp, n_draws=ORACLE_DRAWS, seed=12)
    assert e1 != e2
    assert abs(e1 - e2) <= 3 * np.hypot(se1, se2)



def test_mc_oracle_standard_error_shrinks():
    x, support, current, prior, hp, _ = _oracle_fixture(1)
    _, se1 = mc_ppd_oracle(x, support, current, prior, hp, n_draws=ORACLE_DRAWS, seed=0)
    _, se2 = mc_ppd_oracle(x, support, current, prior, hp, n_draws=2 * ORACLE_DRAWS, seed=1)
    assert se2 / se1 == pytest.approx(1 / np.sqrt(2), rel=0.2)


def test_mc_oracle_errors():
    rng = np.random.default_rng(0)
    hp = Hyperparams(K=1)
    support = [random_stats(rng, 3, n=10)]
    with pytest.raises(InvalidArgument):
        mc_ppd_oracle(np.zeros(3), support, None, random_prior(rng, 3), hp)

    support = [random_stats(rng, 2, n=10)]
    with pytest.raises(InvalidArgument):
        mc_ppd_oracle(np.zeros(2), support, None, random_prior(rng, 2), hp, n_draws=1000)

    diag_prior = GlobalPrior(np.zeros(2), np.ones(2))
    with pytest.raises(InvalidArgument):
        mc_ppd_oracle(np.zeros(2), [support[0].diagonal()], None, diag_prior, hp)


# ==== bayes oracle ====
def test_bayes_oracle_separated():
    dataset, splits, truth = sample_dataset(GenSpec(1, 4, 20, 2, 0.5, 1e-6, seed=8))
    assert bayes_oracle_accuracy(dataset, splits, truth) >= 0.999
    report = bayes_oracle_report(dataset, splits, truth)
    assert report.ts >= 0.999
    assert report.tr >= 0.999


def test_bayes_oracle_identical_classes():
    spec = GenSpec(1, 2, 5, 2, 1., 1.)
    truth = GroundTruth({0: np.zeros(2), 1: np.zeros(2)}, {0: np.zeros(2)}, {0: np.eye(2)}, {0: 0, 1: 0}, spec)
    rng = np.random.default_rng(0)
    dataset = Dataset(rng.normal(size=(20, 2)), np.repeat([0, 1], 10), [[1., 0.], [0., 1.]])
    splits = SplitSpec([0], [1])
    # ties go to the lower class id: class 0 always right, class 1 always wrong
    assert bayes_oracle_accuracy(dataset, splits, truth, rows=np.arange(20)) == 0.5
