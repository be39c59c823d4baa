"""Smoke test for the flatstep extension module.

Build and install first:  maturin build --release -m crates/py/Cargo.toml
                          pip install target/wheels/flatstep-*.whl
"""

import json
import math
import random

import flatstep


def random_symmetric(rng, n):
    a = [[rng.gauss(0.0, 1.0) for _ in range(n)] for _ in range(n)]
    return [[0.5 * (a[i][j] + a[j][i]) for j in range(n)] for i in range(n)]


def main():
    rng = random.Random(0)

    c = flatstep.MethodCoefficients.m1(0.5, 0.1, 0.9)
    roots = c.roots(1.0)
    assert len(roots) == 2
    rho, theta = c.decay_and_angle(1.0)
    assert abs(rho * rho - 0.8) < 1e-12
    assert 0.0 < theta < math.pi
    stable, rho_bar = c.stability(0.1, 1.0, 101)
    assert stable and rho_bar < 1.0

    pair = flatstep.OperatorPair(random_symmetric(rng, 4), random_symmetric(rng, 4))
    log_hol = pair.log_holonomy(1e-2)
    assert len(log_hol) == 4
    x = [1.0, 0.0, 0.0, 0.0]
    assert len(pair.step_b(x, x, 1e-2)) == 4

    diag = [[2.0, 0.0], [0.0, 3.0]]
    assert abs(flatstep.logdet_chol(diag) - math.log(6.0)) < 1e-14
    est, _ = flatstep.slq_logdet(diag, n_probes=8)
    assert abs(est - math.log(6.0)) < 1e-10

    nu = flatstep.SpectralMeasure([(0.2, 1.0), (1.0, 1.0)], 0.2, 1.0)
    floor = flatstep.noise_floor(flatstep.MethodCoefficients.m1(0.5, 0.1, 0.6), nu, 0.01)
    assert floor > 0.0

    found, k, _ = flatstep.ellipsoid_ball([3.0, 1.0], 0.5, 10.0)
    assert found and k <= flatstep.ellipsoid_iteration_bound(2, 10.0, 0.5)

    _, rate = flatstep.chebyshev(800, 1.0, 100.0)
    assert abs(rate - 9.0 / 11.0) < 1e-3

    try:
        flatstep.MethodCoefficients.m1(float("nan"), 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid coefficients accepted")

    assert "decay-ringing" in flatstep.experiments()
    summary = json.loads(flatstep.run_experiment("decay-ringing", ["k_max=200"], seed=1))
    assert summary["schema"] == "decay_ringing/v1"
    assert all(check["passed"] for check in summary["checks"])

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
