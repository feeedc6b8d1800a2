"""Acceptance suite: one test per release criterion.

Each test prints a single "criterion N: ..." line with the measured
numbers so a log scrape shows the full scorecard.
"""

import itertools
import json
import time

import numpy as np

from graspbridge.bridge import (
    cond_flow_target,
    cond_score_target,
    lambda_schedule,
)
from graspbridge.cli import main as cli_main
from graspbridge.nets import loss_grads, net_init
from graspbridge.ot import default_eps, sinkhorn
from graspbridge.pipeline import (
    Checkpoint,
    RunConfig,
    ToyHandSpec,
    eval_alignment,
    fit_bridge,
    gen_dataset,
    make_annotation,
    train,
    translate,
)
from graspbridge.sampler import em_integrate
from graspbridge.wrench import WrenchHull, mc_hull_iou

T_MIN = 1e-3


def test_c01_sinkhorn_feasibility():
    rng = np.random.default_rng(0)
    C = rng.uniform(0, 1, (64, 64))
    a = np.full(64, 1 / 64)
    start = time.monotonic()
    plan = sinkhorn(C, a, a, default_eps(C, 0.1))
    elapsed = time.monotonic() - start
    viol = max(
        float(np.abs(plan.pi.sum(axis=1) - a).max()),
        float(np.abs(plan.pi.sum(axis=0) - a).max()),
    )
    print(f"criterion 1: marginal violation {viol:.2e}, {elapsed:.3f}s")
    assert viol < 1e-6
    assert elapsed < 1.0


def test_c02_sinkhorn_vs_brute_force():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        C = rng.uniform(0, 1, (5, 5))
        u = np.full(5, 0.2)
        plan = sinkhorn(C, u, u, eps=1e-3 * C.max())
        ent = float((plan.pi * C).sum())
        best = min(sum(C[i, p[i]] for i in range(5))
                   for p in itertools.permutations(range(5))) / 5
        worst = max(worst, ent / best - 1)
        assert ent <= best * 1.01
    print(f"criterion 2: worst relative excess {worst:.2e} over 20 instances")


def test_c03_gaussian_transport():
    start = time.monotonic()
    rng = np.random.default_rng(2)
    z0 = rng.standard_normal((2048, 2))
    z1 = rng.standard_normal((2048, 2)) + np.array([3.0, 3.0])

    def cost(i, j):
        d = z0[i][:, None, :] - z1[j][None, :, :]
        return (d**2).sum(axis=-1)

    cfg = RunConfig(steps=5000, batch_size=128, sigma=0.1, seed=0)
    _, _, v_state, s_state, _ = fit_bridge(z0, z1, cost, cfg)
    traj = em_integrate(v_state.ema_params(), s_state.ema_params(),
                        z0[:512], 0.1, 100, np.random.default_rng(3))
    mean = traj.endpoint.mean(axis=0)
    std = traj.endpoint.std(axis=0)
    elapsed = time.monotonic() - start
    print(f"criterion 3: mean {mean.round(3)}, std {std.round(3)}, "
          f"{elapsed:.1f}s")
    assert np.all(np.abs(mean - 3.0) < 0.2)
    assert np.all(np.abs(std - 1.0) < 0.3)
    assert elapsed < 300


def test_c04_score_target_oracles():
    rng = np.random.default_rng(4)
    n = 10_000
    t = rng.uniform(0.01, 0.99, n)
    sigma = rng.uniform(0.05, 2.0, n)
    x0 = rng.standard_normal(n)
    x1 = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    mu = (1 - t) * x0 + t * x1
    s_t = sigma * np.sqrt(t * (1 - t))
    x = mu + s_t * eps
    # identity: lambda_rescaled * (sigma^2/2) * score == -eps
    lam = 2 * np.sqrt(t * (1 - t)) / sigma
    score = (mu - x) / (sigma**2 * t * (1 - t))
    identity_err = float(np.abs(lam * (sigma**2 / 2) * score + eps).max())
    assert identity_err <= 1e-12

    # spot FD check against the Gaussian log density
    h = 1e-6
    fd_rel = 0.0
    for i in range(200):
        def logpdf(y):
            return -0.5 * (y - mu[i]) ** 2 / s_t[i] ** 2

        fd = (logpdf(x[i] + h) - logpdf(x[i] - h)) / (2 * h)
        got = cond_score_target(t[i], [x[i]], [x0[i]], [x1[i]], sigma[i])[0]
        fd_rel = max(fd_rel, abs(got - fd) / max(1.0, abs(fd)))
    print(f"criterion 4: identity max err {identity_err:.2e}, "
          f"FD rel err {fd_rel:.2e}")
    assert fd_rel < 1e-5


def _rk4_quantile_end(z, convention, sigma=1.0):
    x0 = np.array([0.0])
    x1 = np.array([1.0])
    t0, t1 = T_MIN, 1 - T_MIN
    x = (1 - t0) * x0 + t0 * x1 + sigma * np.sqrt(t0 * (1 - t0)) * z
    f = lambda tt, y: cond_flow_target(tt, y, x0, x1, convention)
    ts = np.linspace(t0, t1, 2001)
    for a, b in zip(ts, ts[1:]):
        dt = b - a
        k1 = f(a, x)
        k2 = f(a + dt / 2, x + dt / 2 * k1)
        k3 = f(a + dt / 2, x + dt / 2 * k2)
        k4 = f(a + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    expect = (1 - t1) * x0 + t1 * x1 + sigma * np.sqrt(t1 * (1 - t1)) * z
    return float(abs(x[0] - expect[0]))


def test_c05_flow_convention_oracle():
    derived = {z: _rk4_quantile_end(z, "derived") for z in (-2.0, 1.0, 3.0)}
    literal = {z: _rk4_quantile_end(z, "literal") for z in (-2.0, 1.0, 3.0)}
    print(f"criterion 5: derived errors {derived}, literal errors {literal}")
    for z, err in derived.items():
        assert err < 1e-3 * max(abs(z), 1.0)
    # the alternative prefactor does not keep the quantile curves
    # invariant; documented here rather than asserted as a pass
    assert max(literal.values()) > 1e-2


def test_c06_mc_hull_iou():
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=3)))

    def hull(shift):
        v = corners + [shift, 0.0, 0.0]
        return WrenchHull(np.concatenate([v, np.zeros_like(v)], axis=1), dims=3)

    a, b = hull(0.0), hull(0.5)
    hits = sum(abs(mc_hull_iou(a, b, 1_000_000, seed) - 1 / 3) < 0.01
               for seed in range(100))
    exact = mc_hull_iou(a, a, 1_000_000, 0)
    print(f"criterion 6: {hits}/100 seeds within 0.01, identical -> {exact}")
    assert hits >= 95
    assert exact == 1.0


def test_c07_gradient_check():
    rng = np.random.default_rng(5)
    dim = 3
    v = net_init(dim + 3, (16, 16), dim, seed=6)
    s = net_init(dim + 3, (16, 16), dim, seed=7)
    batch = (rng.uniform(0.01, 0.99, 16),
             rng.standard_normal((16, dim)),
             rng.standard_normal((16, dim)),
             rng.standard_normal((16, dim)),
             rng.uniform(0.1, 1.0, 16))
    _, v_g, s_g = loss_grads(v, s, batch)
    h = 1e-6
    worst = 0.0
    n_checked = 0
    for params, grads in ((v, v_g), (s, s_g)):
        arrays = list(params.weights) + list(params.biases)
        flat_grads = list(grads[0]) + list(grads[1])
        for arr, g in zip(arrays, flat_grads):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                lp, _, _ = loss_grads(v, s, batch)
                arr[idx] = orig - h
                lm, _, _ = loss_grads(v, s, batch)
                arr[idx] = orig
                fd = (lp - lm) / (2 * h)
                rel = abs(g[idx] - fd) / max(1.0, abs(fd))
                worst = max(worst, rel)
                n_checked += 1
                assert rel <= 1e-4, f"parameter {idx}: {g[idx]} vs {fd}"
    print(f"criterion 7: {n_checked} parameters, worst rel err {worst:.2e}")


def test_c08_step_count_trend():
    sigma = 0.3
    x0 = np.array([0.0])
    x1 = np.array([1.0])
    v = lambda t, x: cond_flow_target(t, x, x0, x1)
    s = lambda t, x: (sigma**2 / 2) * cond_score_target(t, x, x0, x1, sigma)

    def mean_err(n_steps):
        errs = [abs(em_integrate(v, s, x0, sigma, n_steps,
                                 np.random.default_rng(seed)).endpoint[0]
                    - x1[0])
                for seed in range(100)]
        return float(np.mean(errs))

    coarse, fine = mean_err(10), mean_err(200)
    print(f"criterion 8: endpoint error {coarse:.4f} @10 steps, "
          f"{fine:.4f} @200 steps")
    assert fine <= coarse


def test_c09_end_to_end_toy_translation():
    start = time.monotonic()
    source = gen_dataset(ToyHandSpec("k5", 5), 512 + 64, seed=0)
    target = gen_dataset(ToyHandSpec("k4", 4), 512, seed=1)
    train_src = type(source)(source.spec, source.object_points,
                             source.object_normals,
                             source.annotations[:512], source.seed)
    test_anns = source.annotations[512:]
    test_cfgs = [a.config for a in test_anns]

    cfg = RunConfig(cost="contact", steps=3000, batch_size=64, sigma=0.07,
                    lr=2e-3, warmup=64, seed=0)
    ckpt, loss_log = train(train_src, target, cfg)

    cfg0 = RunConfig(cost="contact", steps=0, batch_size=64, sigma=0.07,
                     lr=2e-3, warmup=64, seed=0)
    ckpt0, _ = train(train_src, target, cfg0)

    def run(checkpoint: Checkpoint):
        out = translate(checkpoint, test_cfgs, n_steps=100, seed=2)
        anns = [make_annotation(target.spec, c, source.object_points,
                                source.object_normals) for c in out]
        nonempty = sum(a.contact is not None for a in anns)
        report = eval_alignment(test_anns, anns, n_samples=100_000, seed=3)
        return nonempty, report

    nonempty, report = run(ckpt)
    _, report0 = run(ckpt0)
    elapsed = time.monotonic() - start
    print(f"criterion 9: nonempty {nonempty}/64, trained IoU "
          f"{report['mean_iou']}, untrained IoU {report0['mean_iou']}, "
          f"loss {loss_log[0]:.2f}->{loss_log[-1]:.2f}, {elapsed:.0f}s")
    assert nonempty >= 0.8 * 64
    assert report["mean_iou"] is not None
    baseline = report0["mean_iou"] if report0["mean_iou"] is not None else 0.0
    assert report["mean_iou"] > baseline
    assert elapsed < 900


def test_c10_pipeline_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("GRASPBRIDGE_THREADS", "0")
    (tmp_path / "src.json").write_text(
        json.dumps({"hand_id": "src", "n_fingers": 4}))
    (tmp_path / "tgt.json").write_text(
        json.dumps({"hand_id": "tgt", "n_fingers": 3}))

    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        for argv in (
            ["gen", "--hand", str(tmp_path / "src.json"), "--n", "16",
             "--seed", "0", "--out", str(d / "s.json")],
            ["gen", "--hand", str(tmp_path / "tgt.json"), "--n", "16",
             "--seed", "1", "--out", str(d / "t.json")],
            ["train", "--source", str(d / "s.json"),
             "--target", str(d / "t.json"), "--cost", "contact",
             "--steps", "20", "--batch-size", "8", "--seed", "0",
             "--out", str(d / "ck.bin")],
            ["translate", "--ckpt", str(d / "ck.bin"),
             "--in", str(d / "s.json"), "--steps", "25", "--seed", "0",
             "--out", str(d / "tr.json")],
            ["eval", "--source", str(d / "s.json"),
             "--translated", str(d / "tr.json"), "--iou-samples", "5000",
             "--seed", "0", "--out", str(d / "metrics.json")],
        ):
            assert cli_main(argv) == 0
        return (d / "metrics.json").read_bytes()

    first = run("a")
    second = run("b")
    print(f"criterion 10: metrics identical across runs "
          f"({len(first)} bytes) -> {first == second}")
    assert first == second
