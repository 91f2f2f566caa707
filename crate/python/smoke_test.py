"""Smoke test for the quantcons Python extension."""

import math

import quantcons as qc


def main() -> None:
    k5 = qc.Topology.complete(5)
    model = qc.LinkFailureModel.fixed(k5)
    spec = model.spectral()
    assert abs(spec["lambda2"] - 5.0) < 1e-9 and abs(spec["lambda_n"] - 5.0) < 1e-9

    p3 = qc.Topology.path(3)
    s = qc.spectral(p3.laplacian())
    assert abs(s["lambda2"] - 1.0) < 1e-9 and abs(s["lambda_n"] - 3.0) < 1e-9
    half = qc.LinkFailureModel.erasure(p3, 0.5).spectral()
    assert abs(half["lambda2"] - 0.5) < 1e-9

    assert qc.quantize(0.26, 0.5) == 0.5
    assert qc.quantize(-0.24, 0.5) == 0.0
    finite = qc.QuantizerSpec(1.0, p=2)
    assert finite.levels == 5 and finite.dithered(2.6, 0.0) is None
    nu = qc.dither_samples(7, 0.5, 20000)
    assert all(-0.25 <= v < 0.25 for v in nu)
    assert abs(sum(nu) / len(nu)) < 0.01

    weights = qc.WeightSequence(0.25)
    quantizer = qc.QuantizerSpec(0.5)
    x0 = [1.0, 2.0, 3.0, 4.0, 5.0]
    a = qc.run(x0, model, weights, quantizer, 2000, seed=3)
    b = qc.run(x0, model, weights, quantizer, 2000, seed=3)
    assert a == b
    assert a["status"] == "max_iterations" and not a["saturated"]
    assert max(a["final_state"]) - min(a["final_state"]) < 0.05

    forced = qc.run([10.0, -10.0], qc.LinkFailureModel.fixed(qc.Topology.path(2)),
                    qc.WeightSequence(0.1), qc.QuantizerSpec(1.0, p=1), 100, seed=1, b=10.0)
    assert forced["saturated"] and forced["theta"] == 0.0

    stats = qc.monte_carlo(x0, model, weights, quantizer, 5000, trials=100, seed=4, epsilon=0.2)
    inputs = qc.BoundInputs(model, 0.5, weights)
    bound = qc.mse_bound(inputs)["value"]
    assert stats["empirical_mse"] <= bound, (stats["empirical_mse"], bound)
    assert len(stats["thetas"]) == 100

    k4 = qc.BoundInputs(qc.LinkFailureModel.fixed(qc.Topology.complete(4)), 1.0,
                        qc.WeightSequence(0.1), b=1.0, p=10, epsilon=0.1)
    z = qc.zero_rate_lb(k4)["value"]
    assert abs(z - (1 - math.sqrt(8) / 10 - 17 / 201)) < 1e-12
    design = qc.optimize_delta(k4)
    assert design["certificate"] and design["delta_star"] > 0

    p3_inputs = qc.BoundInputs(qc.LinkFailureModel.fixed(p3), 1.0, qc.WeightSequence(0.1))
    assert qc.i_epsilon(p3_inputs, 0.5) == 26

    bad = qc.WeightSequence(0.25, d0=1.0, tau_d=0.5)
    assert not bad.persistence()["generalized_persistent"]
    try:
        qc.mse_bound(qc.BoundInputs(model, 1.0, bad), "time_varying")
    except ArithmeticError:
        pass
    else:
        raise AssertionError("time-varying bound should be refused")

    try:
        qc.BoundInputs(qc.LinkFailureModel.erasure(p3, 1.0), 1.0, weights)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("disconnected mean graph should be rejected")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
