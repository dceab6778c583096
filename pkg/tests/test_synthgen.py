import numpy as np
import pytest
from dataclasses import replace

from fairrank.dataset import train_test_split, write_csv
from fairrank.synthgen import (FEATURES, GENDER, CohortSpec, LabelGenSpec, generate_labels,
                               label_running_example, label_zeta, sample_cohort, zeta_weights)


@pytest.fixture(scope="module")
def cohort():
    return sample_cohort(CohortSpec(n=2000, seed=3))


def test_score_ranges_and_increments(cohort):
    X = cohort.frame
    for col in ("gre_v", "gre_q"):
        assert X[col].between(130, 170).all()
        assert (X[col] == np.round(X[col])).all()
    assert X["gre_aw"].between(0, 6).all()
    assert ((X["gre_aw"] * 2) == np.round(X["gre_aw"] * 2)).all()


def test_exact_gender_split_and_prefix_stability():
    small = sample_cohort(CohortSpec(n=10, seed=5))
    large = sample_cohort(CohortSpec(n=25, seed=5))
    assert (small.frame[GENDER] == "male").sum() == 5
    assert small.frame.equals(large.frame.iloc[:10])
    assert (sample_cohort(CohortSpec(n=9, male_share=1 / 3)).frame[GENDER] == "male").sum() == 3


def test_male_quant_mean_monte_carlo():
    big = sample_cohort(CohortSpec(n=100_000, seed=0))
    male = big.frame[big.frame[GENDER] == "male"]
    assert male["gre_q"].mean() == pytest.approx(156.1, abs=0.5)
    female = big.frame[big.frame[GENDER] == "female"]
    assert female["gre_q"].mean() == pytest.approx(151.2, abs=0.5)


def test_invalid_covariance_rejected():
    with pytest.raises(ValueError):
        CohortSpec(sigma_m=np.eye(3) * -1)
    with pytest.raises(ValueError):
        CohortSpec(sigma_f=[[1, 2, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        LabelGenSpec(zeta=-1)


def test_running_example_bounds(cohort):
    labels = label_running_example(cohort, seed=0)
    Z = cohort.frame[list(FEATURES)]
    best = (Z == Z.max()).all(axis=1) & (cohort.frame[GENDER] == "male")
    worst = (Z == Z.min()).all(axis=1) & (cohort.frame[GENDER] == "female")
    assert (labels[best.to_numpy()] == "+").all()
    assert (labels[worst.to_numpy()] == "-").all()


def _flip_to_female(cohort):
    frame = cohort.frame.copy()
    frame[GENDER] = "female"
    return replace(cohort, frame=frame)


@pytest.mark.parametrize("rule", ["running", "zeta"])
def test_gender_flip_only_removes_positives(cohort, rule):
    female = _flip_to_female(cohort)
    if rule == "running":
        before, after = label_running_example(cohort, 1), label_running_example(female, 1)
    else:
        before, after = label_zeta(cohort, 2.0, 1), label_zeta(female, 2.0, 1)
    assert not ((before == "-") & (after == "+")).any()
    assert ((before == "+") & (after == "-")).any()


def test_zeta_weights():
    np.testing.assert_allclose(zeta_weights(0), [0, 0.25, 0.5, 0.25])
    for z in (0, 0.5, 3, 100):
        w = zeta_weights(z)
        assert w.sum() == pytest.approx(1.0)
        assert w[2] / w[1] == pytest.approx(2.0)
    assert zeta_weights(1e9)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        label_zeta(sample_cohort(CohortSpec(n=4)), -0.5)


def test_zeta_zero_ignores_gender(cohort):
    np.testing.assert_array_equal(label_zeta(cohort, 0.0, 4),
                                  label_zeta(_flip_to_female(cohort), 0.0, 4))


def test_deterministic_regeneration(tmp_path):
    paths = []
    for k in range(2):
        c = sample_cohort(CohortSpec(n=300, seed=9))
        labels = generate_labels(c, LabelGenSpec(variant="zeta", zeta=1.5, seed=2))
        paths.append(tmp_path / f"c{k}.csv")
        write_csv(c.with_labels(labels), paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("zeta", [0.0, 1.0, 2.0, 3.0])
def test_positive_rate_on_test_partitions(zeta):
    rates = []
    for seed in range(5):
        c = sample_cohort(CohortSpec(n=1000, seed=100 + seed))
        data = c.with_labels(label_zeta(c, zeta, seed))
        _, test = train_test_split(data, 200, seed)
        rates.append(np.mean(test.labels == "+"))
    assert 0.50 <= np.mean(rates) <= 0.65


def test_admission_ratio_nonincreasing_in_zeta():
    zetas = np.arange(0, 3.01, 0.5)
    ratios = np.zeros((20, len(zetas)))
    for seed in range(20):
        c = sample_cohort(CohortSpec(n=1000, seed=seed))
        male = (c.frame[GENDER] == "male").to_numpy()
        for k, z in enumerate(zetas):
            pos = label_zeta(c, z, seed) == "+"
            ratios[seed, k] = pos[~male].mean() / pos[male].mean()
    mean = ratios.mean(axis=0)
    assert np.all(np.diff(mean) <= 0)
