"""Smoke test for the pygmhmm extension: build with `pip install -e crates/py`."""

import json
import math

import pygmhmm as g


def main():
    model = g.GmHmm.reference()
    assert model.n_states == 3
    assert abs(sum(model.initial) - 1.0) < 1e-12

    state1 = model.emission(1)
    assert abs(state1.mean() - 1.41) < 0.01
    assert abs(state1.weighted_sigma() - 1.192) < 0.01
    assert state1.moments()["variance"] ** 0.5 >= 3.0

    stressed = model.stress(1, -10.0, 0.1, 0.1)
    report = g.impact_report(model.emission(1), stressed.emission(1))
    threshold, before, after, ratio = report["tails"][0]
    assert threshold == -5.0 and 10.0 <= ratio <= 20.0

    mix = g.compose_factors([
        ("portfolio", 0.7, g.GaussianMixture([1.0], [1.41], [1.2])),
        ("operational", 0.2, g.GaussianMixture([1.0], [0.0], [1.0])),
        ("credit", 0.1, g.GaussianMixture([1.0], [-0.1], [0.1])),
    ])
    assert abs(mix.mean() - 0.977) <= 1e-12

    returns = g.log_returns([100.0, 105.0, 95.0 * 1.05])
    assert abs(returns[0] - 100 * math.log(1.05)) < 1e-9
    assert abs(returns[1] - 100 * math.log(0.95)) < 1e-9

    fan = model.generate_fan(10, seed=7, sort=True)
    assert len(fan) == 10 and all(p == 0.1 for _, p in fan)
    assert [v for v, _ in fan] == sorted(v for v, _ in fan)
    assert fan == model.generate_fan(10, seed=7, sort=True)

    tree = json.loads(model.generate_tree([6, 6], seed=3))
    assert len(tree["nodes"]) == 43

    path = model.simulate(300, seed=11)
    values = [v for _, v in path]
    fitted, info = g.calibrate(values, states=2, components=1, restarts=3, seed=1)
    assert fitted.n_states == 2 and len(info["restarts"]) == 3
    assert fitted.log_likelihood(values) == info["log_likelihood"]

    again = g.GmHmm.from_json(model.to_json())
    assert again.transition == model.transition

    try:
        model.emission(4)
    except ValueError:
        pass
    else:
        raise AssertionError("state 4 accepted")

    print("pygmhmm smoke test passed")


if __name__ == "__main__":
    main()
