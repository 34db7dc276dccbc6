"""Smoke test for the eigsgd extension module.

Run after `cargo build --release -p eigsgd-py`; falls back to loading
target/release/libeigsgd_py.so when `eigsgd` is not installed.
"""
import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import eigsgd
        return eigsgd
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libeigsgd_py.so", "libeigsgd_py.dylib", "eigsgd_py.dll"):
        path = root / "target" / "release" / name
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("eigsgd", str(path))
            spec = importlib.util.spec_from_file_location("eigsgd", str(path), loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["eigsgd"] = module
            return module
    sys.exit("eigsgd extension not found; run `cargo build --release -p eigsgd-py`")


def close(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main():
    eg = load()
    print("eigsgd", eg.__version__)

    p = eg.Problem(30, 20, 0.1, 1.0, seed=2)
    assert (p.rows, p.cols) == (30, 20) and p.consistent
    assert close(p.sigma[0], 1.0, 1e-12) and close(p.sigma[-1], 0.1, 1e-12)
    x0 = p.initial_point(1.0, 7)
    c = p.constants()
    print(p, "M L~ = %.3f, c(A) = %.1f" % (c["m_l_tilde"], c["c_a"]))

    # GD tracks the mean product exactly
    s = eg.Schedule.harmonic(0.5, 20.0)
    t = eg.run_trajectory(p, "gd", x0, 200, [1, 10, 20], schedule=s)
    for i, l in enumerate(t.probes):
        want = eg.expected_component(p, s, l, x0, 199)
        assert close(t.components[i][-1], want, 1e-10), (l, t.components[i][-1], want)
        assert close(eg.mean_factor(s, p.sigma[l - 1] ** 2, 199) * p.component(x0, l), want, 1e-12)

    # SGD ensemble second moment stays under the recursion bound
    e = eg.run_ensemble(p, "sgd", x0, 500, [1, 20], 50, schedule=s, seed=3)
    assert e.iters[0] == 0 and e.iters[-1] == 500 and len(e.seeds) == 50
    for i, l in enumerate(e.probes):
        bound = eg.second_moment_bound(p, s, l, x0, 499)
        assert e.mean_comp_sq[i][-1] <= bound, (l, e.mean_comp_sq[i][-1], bound)

    k = eg.run_ensemble(p, "kaczmarz", x0, 100, [1], 200, seed=1)
    want = eg.kaczmarz_expected_component(p, 1, x0, 100)
    sd = k.stderr_comp[0][-1]
    assert abs(k.mean_comp[0][-1] - want) <= 5 * sd + 1e-12

    series = [(float(n), n ** -2.0) for n in range(1, 2001)]
    slope_early, slope_late, detected = eg.detect_phase_transition(series, (10, 100), (200, 2000))
    assert close(slope_early, -2.0, 1e-6) and close(slope_late, -2.0, 1e-6) and not detected

    try:
        eg.Schedule.polynomial(0.2, 5.0, 1.0)
    except ValueError as err:
        print("rejected:", err)
    else:
        raise AssertionError("gamma = 1 accepted")

    cfg = eg.preset("fig2", "desk").replace("repetitions = 20", "repetitions = 2")
    files = eg.compute(cfg)
    assert set(files) == {"ensemble.csv", "theory.csv", "plot.py", "manifest.json"}, set(files)
    assert not math.isnan(float(files["ensemble.csv"].splitlines()[-1].split(",")[1]))
    print("smoke test ok")


if __name__ == "__main__":
    main()
