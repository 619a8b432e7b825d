"""Smoke test for the msmda_py extension module.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/msmda_py-*.whl
"""

import json
import math
import os
import tempfile

import msmda_py as m


def main():
    value, gs, gt = m.mmd_squared([[0.0, 0.0], [1.0, 0.0]], [[3.0, 1.0], [2.0, 2.0], [4.0, 0.5]])
    assert value > 0.0 and len(gs) == 2 and len(gt) == 3
    same, _, _ = m.mmd_squared([[1.0, 2.0], [0.0, 1.0]], [[1.0, 2.0], [0.0, 1.0]], "linear")
    assert abs(same) < 1e-12

    assert m.alpha_schedule(0, 200) == 0.0
    assert abs(m.alpha_schedule(200, 200) - 0.9999092) < 1e-6
    assert abs(m.de_gaussian([-1.0, 1.0]) - 1.418939) < 1e-6

    z = m.normalize([[1.0, 10.0], [3.0, 20.0]], "electrode")
    assert z == [[-1.0, -1.0], [1.0, 1.0]]

    synth = {
        "num_domains": 3, "samples_per_domain": 30, "num_classes": 3, "feature_dim": 5,
        "class_separation": 3.0, "domain_shift_scale": 1.0, "noise_std": 1.0, "rng_seed": 0,
    }
    domains = m.generate_synthetic(json.dumps(synth))
    assert len(domains) == 3 and len(domains[0][0]) == 30 and domains[0][2] == (1, 1)

    model = m.Model(5, 3, 2, cfe_dims=[8, 6], dsfe_dim=4, seed=1)
    labels, probs = model.predict(domains[0][0])
    assert len(labels) == 30 and all(abs(sum(p) - 1.0) < 1e-12 for p in probs)
    assert len(model.branch_features(domains[0][0], 1)[0]) == 4
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        model.save(path)
        assert m.Model.load(path).predict(domains[1][0]) == model.predict(domains[1][0])

    ok, report = m.verify("schedule")
    assert ok, report

    config = {
        "data": dict(kind="synth", **synth),
        "scenario": "cross-subject",
        "normalization": {"kind": "none", "order": "A"},
        "model": {"cfe_dims": [8, 6], "dsfe_dim": 4, "leaky_slope": 0.01},
        "train": {"epochs": 3, "batch_size": 16},
        "seeds": [0],
    }
    summary = json.loads(m.run_experiment(json.dumps(config)))
    assert 0.0 <= summary["mean"] <= 1.0 and not math.isnan(summary["mean"])

    try:
        m.alpha_schedule(1, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("python smoke test passed: mean accuracy %.3f" % summary["mean"])


if __name__ == "__main__":
    main()
