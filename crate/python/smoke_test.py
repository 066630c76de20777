"""Smoke test for the pyrcurc extension: exercises every exported entry point
once and checks results against numpy."""

import math
import os
import tempfile

import numpy as np

import pyrcurc


def main():
    x = pyrcurc.gen_low_rank(40, 30, 2, seed=1)
    assert x.shape == (40, 30) and x.dtype == np.float64
    assert np.linalg.matrix_rank(x) == 2
    assert np.array_equal(x, pyrcurc.gen_low_rank(40, 30, 2, seed=1))

    prob = pyrcurc.SyntheticProblem(200, 200, 3, 0.05, amp=5.0, seed=7)
    assert np.allclose(prob.y, prob.x_true + prob.s_true)
    assert pyrcurc.sparsity_alpha(prob.s_true) <= 0.05 + 1e-12
    assert pyrcurc.incoherence_mu(prob.x_true, 3) >= 1.0 - 1e-12

    obs = pyrcurc.ccs_sample(prob.y, 0.3, 0.3, 0.5, 0.5, seed=7)
    assert obs.shape == (200, 200)
    assert len(obs.row_idx) == 60 and len(obs.col_idx) == 60
    for i, j, v in obs.row_entries()[:50] + obs.col_entries()[:50]:
        assert prob.y[i, j] == v
    again = pyrcurc.Observation.from_json(obs.to_json())
    assert again.to_json() == obs.to_json()

    report = pyrcurc.solve(obs, 3, gamma=0.9, max_iters=300, record_time=False)
    assert report.iterations == len(report.trace) > 0
    assert report.termination in ("converged", "max_iters", "stagnated")
    est = report.estimate()
    left, right = report.low_rank_factors()
    assert np.allclose(est, left @ right.T)
    err = pyrcurc.recovery_error(est, prob.x_true)
    assert math.isfinite(err)
    rerun = pyrcurc.solve(obs, 3, gamma=0.9, max_iters=300, record_time=False)
    assert rerun.trace_csv() == report.trace_csv()

    errors = [t[1] for t in report.trace]
    slope, r2, used = pyrcurc.fit_linear_rate(errors)
    assert used >= 2 and 0.0 <= r2 <= 1.0

    v = np.array([[-3.0, 1.5, 2.0, 0.0]])
    assert pyrcurc.hard_threshold(v, 2.0).tolist() == [[-3.0, 0.0, 2.0, 0.0]]
    assert abs(pyrcurc.psnr(np.zeros((3, 3)), np.full((3, 3), 0.1), peak=1.0) - 20.0) < 1e-12

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "x.bin")
        pyrcurc.write_matrix(path, x)
        assert np.array_equal(pyrcurc.read_matrix(path), x)
        obs_path = os.path.join(tmp, "obs.json")
        obs.save(obs_path)
        assert pyrcurc.Observation.load(obs_path).to_json() == obs.to_json()

    try:
        pyrcurc.gen_low_rank(5, 5, 9, seed=0)
    except ValueError:
        pass
    else:
        raise AssertionError("rank above the dimensions must be rejected")

    print(f"smoke test ok: {report!r}, recovery error {err:.3e}, slope {slope:.3f}")


if __name__ == "__main__":
    main()
