import os
import subprocess
import sys

import numpy as np
import pytest

from doco import algo, kernels, scenarios

needs_compiled = pytest.mark.skipif(kernels.compiled_simulate is None, reason="compiled kernel not built")


def _cases():
    sin = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=1), 1500)
    rods = scenarios.build_rods(scenarios.RodsConfig(), 1500)
    return {"sinusoidal": sin, "rods": rods}


@needs_compiled
@pytest.mark.parametrize("name", ["sinusoidal", "rods"])
@pytest.mark.parametrize("alg", ["doco", "odg"])
def test_backends_agree(name, alg):
    scen = _cases()[name]
    obj = scen.objective
    L, _ = obj.convexity_constants()
    x0 = np.random.default_rng(0).standard_normal((obj.n, obj.d))
    ref = algo.simulate(obj, scen.topology.W, scen.A, x0, 0.4 / L, 1500, alg, "python")
    got = algo.simulate(obj, scen.topology.W, scen.A, x0, 0.4 / L, 1500, alg, "compiled")
    assert ref[2:] == got[2:]
    for a, b in zip(ref[:2], got[:2]):
        np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-10)


@needs_compiled
def test_backends_agree_on_divergence():
    scen = _cases()["sinusoidal"]
    obj = scen.objective
    L, _ = obj.convexity_constants()
    x0 = np.zeros((obj.n, obj.d))
    ref = algo.simulate(obj, scen.topology.W, scen.A, x0, 2 / L, 1500, "odg", "python")
    got = algo.simulate(obj, scen.topology.W, scen.A, x0, 2 / L, 1500, "odg", "compiled")
    assert ref[3] and got[3]
    assert ref[2] == got[2]
    assert ref[0].shape == got[0].shape == (ref[2] + 1, obj.n, obj.d)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_iterate_flags_divergence():
    obj = scenarios.build_rods(scenarios.RodsConfig(), 20).objective
    W = np.full((4, 4), 0.25)
    x0 = np.zeros((4, 2))
    for fn in filter(None, (kernels.python_simulate, kernels.compiled_simulate)):
        xs, ys, steps, div = fn(obj.rows, obj.measurements, W, np.eye(2), x0, np.inf, False, 10, 1e9)
        assert div and steps == 1


def test_environment_forces_python_backend():
    env = dict(os.environ, DOCO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import doco; print(doco.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
def test_default_backend_is_compiled():
    env = {k: v for k, v in os.environ.items() if k != "DOCO_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", "import doco; print(doco.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "compiled"
