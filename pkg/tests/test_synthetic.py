import numpy as np

from earlywarn import synthetic
from earlywarn.synthetic import SyntheticSpec


def test_shape_and_truth():
    raw, truth = synthetic.make_cycles(SyntheticSpec(n_cycles=6), seed=1)
    assert raw.n_features == 12
    assert raw.labels.sum() == 6
    np.testing.assert_array_equal(raw.timestamps[raw.labels == 1], truth.failure_times)
    assert np.all(np.diff(raw.timestamps) == 120.0)
    assert all(o < f for o, f in zip(truth.onset_times, truth.failure_times))
    assert truth.to_dict()["planted"] == [1, 4, 8]


def test_deterministic():
    a, _ = synthetic.make_cycles(SyntheticSpec(n_cycles=3), seed=4)
    b, _ = synthetic.make_cycles(SyntheticSpec(n_cycles=3), seed=4)
    np.testing.assert_array_equal(a.features, b.features)


def test_planted_channels_shift_before_failure():
    spec = SyntheticSpec(n_cycles=8, operating_spread=0.0)
    raw, truth = synthetic.make_cycles(spec, seed=0)
    shifts = np.zeros(12)
    for rows in raw.cycles():
        x = raw.features[rows]
        sd = x[spec.restart_rows:spec.restart_rows + 60].std(axis=0)
        base = x[spec.restart_rows:spec.restart_rows + 60].mean(axis=0)
        shifts += np.abs(x[-5:].mean(axis=0) - base) / sd
    shifts /= 8
    planted = list(spec.planted)
    others = [d for d in range(12) if d not in planted]
    assert shifts[planted].min() > 5 * shifts[others].max()
