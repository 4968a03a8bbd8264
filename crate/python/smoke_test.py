"""Exercise the Python bindings end to end; exits non-zero on failure."""

import math

import merton_arena as ma


def main():
    agent = ma.AgentType(x0=1.0, delta=3.0, theta=0.8, eps=1.0, mu=5.0, sigma=1.0)
    pop = ma.Population(1.0, [agent, agent])
    eq = ma.solve_n(pop)
    assert len(eq) == 2
    assert abs(eq.phi - 15.0) < 1e-12
    assert abs(eq.pi[0] - 5.769230769230769) < 1e-12
    assert abs(eq.theta_crit - 2.6 / 3.0) < 1e-12
    assert abs(eq.consumption(0, 1.0) - eq.lambda_[0]) < 1e-12

    dist = ma.TypeDistribution(1.0, [(1.0, ma.AgentType(x0=1, delta=5, theta=0.4, eps=1, mu=5, sigma=1))])
    mf = ma.solve_mf(dist)
    assert abs(mf.theta_crit - 0.52) < 1e-12

    assert ma.consumption_rate(0.0, 1.0, 1.0, 0.0) == 0.5
    assert ma.classify_regime(25.0 / 9.0, 1.0) == -1

    report = ma.fixed_point_check(pop, steps=2000)
    assert report["consumption_residual"] < 1e-8, report

    br = ma.best_response_test(pop, 0, steps=50, paths=2000, seed=1)
    null = [c for c in br["cells"] if c["dpi"] == 0 and c["a"] == 0 and c["b"] == 0]
    assert null and null[0]["mean_difference"] == 0.0

    table = ma.mfg_convergence(dist, [4, 8, 16])
    assert all(row["pi_gap"] < 1e-12 for row in table["rows"])

    try:
        ma.AgentType(x0=1.0, delta=3.0, theta=1.2, eps=1.0, mu=5.0, sigma=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("theta > 1 accepted")

    back = ma.Population.from_json(pop.to_json())
    assert math.isclose(ma.solve_n(back).beta[1], eq.beta[1], rel_tol=0, abs_tol=0)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
