"""The full pipeline gives the same depth map on either kernel backend."""

import numpy as np

from tgi3d import backend
from tgi3d.experiments import run_pipeline
from tgi3d.scene import make_bar_scene_1d, make_phantom_scene


def _run(scene, K=600, **kw):
    return run_pipeline(scene, K, **kw)


def test_python_backend_noise_free_exact(python_backend):
    result = _run(make_bar_scene_1d(50, 200, 50, 300), dsnr_db=None, P=300)
    assert result.rmse == 0.0


def test_backends_agree_with_noise(monkeypatch):
    from tgi3d import reconstruct, scene as scene_mod, signal

    scene = make_phantom_scene(40, 40, 20, 300, scale=0.25)
    runs = {}
    for name, mod in (("compiled", backend.kernels), ("python", backend.fallback)):
        for m in (signal, scene_mod, reconstruct):
            monkeypatch.setattr(m, "kernels", mod)
        runs[name] = _run(scene, K=800, dsnr_db=10.0, P=300)
    a, b = runs["compiled"], runs["python"]
    assert np.array_equal(a.estimate.t_hat, b.estimate.t_hat)
    np.testing.assert_allclose(a.estimate.peak_corr, b.estimate.peak_corr, rtol=1e-12, equal_nan=True)
