import math

import numpy as np
import pytest

from lapinfer.errors import ValidationError
from lapinfer.simulate.association import (
    association_covariance,
    association_mutual_info,
    subject_laplacians,
)


class TestCovarianceAssociation:
    def test_constant_series(self):
        S = association_covariance(np.tile([1.0, -2.0, 3.0], (8, 1)))
        np.testing.assert_array_equal(S.entries, np.zeros((3, 3)))

    def test_two_points(self):
        x = np.array([1.0, 2.0, -0.5])
        S = association_covariance(np.vstack([x, -x]))
        np.testing.assert_allclose(S.entries, 2 * np.outer(x, x), rtol=1e-15)

    def test_two_pass_oracle(self, rng):
        series = rng.normal(size=(40, 4)) * [1.0, 3.0, 0.2, 7.0]
        T, d = series.shape
        means = [sum(series[t, a] for t in range(T)) / T for a in range(d)]
        oracle = np.array([
            [sum((series[t, a] - means[a]) * (series[t, b] - means[b]) for t in range(T)) / (T - 1)
             for b in range(d)]
            for a in range(d)
        ])
        np.testing.assert_allclose(association_covariance(series).entries, oracle, rtol=1e-12)

    def test_needs_two_time_points(self):
        with pytest.raises(ValidationError):
            association_covariance(np.ones((1, 3)))


class TestMutualInformation:
    def test_hand_example(self):
        series = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        I = association_mutual_info(series, bins=2).entries
        assert I[0, 1] == pytest.approx(math.log(2), rel=1e-12)
        assert I[0, 0] == pytest.approx(math.log(2), rel=1e-12)

    def test_identical_coordinates_carry_their_entropy(self, rng):
        x = rng.normal(size=500)
        I = association_mutual_info(np.column_stack([x, x, rng.normal(size=500)]), bins=8).entries
        assert I[0, 1] == pytest.approx(I[0, 0], rel=1e-12)
        counts = np.histogram(x, bins=8)[0]
        p = counts[counts > 0] / x.size
        assert I[0, 0] == pytest.approx(-np.sum(p * np.log(p)), rel=1e-9)

    def test_independent_coordinates(self, rng):
        T, bins = 10_000, 10
        I = association_mutual_info(rng.normal(size=(T, 3)), bins=bins).entries
        dof = (bins - 1) ** 2
        bound = dof / (2 * T) + 3 * math.sqrt(2 * dof) / (2 * T)
        off = I[~np.eye(3, dtype=bool)]
        assert np.all(off <= bound)

    def test_symmetric_and_non_negative(self, rng):
        series = rng.normal(size=(60, 5)) @ rng.normal(size=(5, 5))
        I = association_mutual_info(series).entries
        np.testing.assert_array_equal(I, I.T)
        assert np.all(I >= 0)

    def test_constant_coordinate(self, rng):
        series = np.column_stack([rng.normal(size=30), np.full(30, 4.0)])
        I = association_mutual_info(series, bins=5).entries
        assert I[0, 1] == 0.0
        assert I[1, 1] == 0.0

    def test_needs_two_bins(self, rng):
        with pytest.raises(ValidationError):
            association_mutual_info(rng.normal(size=(10, 2)), bins=1)


class TestSubjectLaplacians:
    @pytest.mark.parametrize("kind", ["covariance", "mutual_information"])
    def test_one_laplacian_per_subject(self, rng, kind):
        laplacians = subject_laplacians(rng.normal(size=(3, 40, 4)), kind)
        assert len(laplacians) == 3
        for L in laplacians:
            assert L.dim == 4
            assert np.max(np.abs(L.entries.sum(axis=1))) <= 1e-10

    def test_unknown_kind(self, rng):
        with pytest.raises(ValidationError):
            subject_laplacians(rng.normal(size=(2, 10, 3)), "correlation")
