"""Quick end-to-end check of the extension module.

    pip install --no-build-isolation -e crates/python
    python crates/python/python/smoke_test.py
"""

import math

import vieq_py as v


def main():
    assert "rotation" in v.problems()

    p = v.Problem("quadratic-cond100")
    assert p.dim == 2 and p.has_objective
    assert p.solution == [1.0, 1.0]
    assert p.gradient(p.solution) == [0.0, 0.0]

    fwd = v.run("rotation", "forward", 50, eta=0.1)
    eg = v.run("rotation", "eg", 50, eta=0.1)
    assert len(fwd) == 51
    assert all(b > a for a, b in zip(fwd.dist_err, fwd.dist_err[1:]))
    assert all(b < a for a, b in zip(eg.dist_err, eg.dist_err[1:]))
    # One EG step on the rotation shrinks distance by √(1 - η² + η⁴).
    assert math.isclose(eg.dist_err[1] / eg.dist_err[0], math.sqrt(1 - 0.01 + 1e-4), rel_tol=1e-12)
    assert fwd.f_err[0] is None

    gd = v.run("quadratic-cond100", "gd", 0)
    assert gd.k == [0] and gd.step == 0.01

    agd = v.run("quadratic-dense50", "agd", 2000)
    pts = [(k, e) for k, e in zip(agd.k, agd.f_err) if k >= 10]
    slope, _, _ = v.fit_rate(pts, "power")
    assert slope < -0.5, slope

    exact = v.run("strongmono-affine", "ppm", 30, eta=0.2)
    series = v.run("strongmono-affine", "ppm", 30, eta=0.2, resolvent_backend="series:40")
    assert exact.dist_err[-1] < exact.dist_err[0] / 100
    assert all(math.isclose(a, b, rel_tol=1e-9) for a, b in zip(exact.dist_err, series.dist_err))

    ok, checks = v.check("monotone", samples=200, seed=42)
    assert ok and checks == sorted(checks)

    tr = v.integrate("bregman:4", 10.0, 1e-3, problem="quadratic-identity")
    assert tr.v is not None and tr.lyapunov is not None
    assert all(b <= a + 1e-9 for a, b in zip(tr.lyapunov, tr.lyapunov[1:]))
    try:
        v.integrate("nesterov", 1.0, 0.1, t0=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("singular start accepted")

    chain = v.sample("ula", 200_000, 0.01, seed=7)
    var = chain.variance(burn_in=1000)[0]
    assert 0.95 < var < 1.05, var

    print("smoke test passed")


if __name__ == "__main__":
    main()
