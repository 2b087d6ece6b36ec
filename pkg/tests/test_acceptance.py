"""Acceptance criteria, one test per criterion, each printing PASS/FAIL lines.

Criteria 4 and 5 need the trained desk-scale artifacts from
``acceptance_artifacts.py``; build them ahead of time with

    python3 tests/acceptance_artifacts.py

or the first run of this module will train them (roughly an hour each on a
desktop CPU).
"""

import json
import time

import numpy as np
import pytest

import acceptance_artifacts as artifacts
from oracles import (
    empirical_cf,
    fd_gradient_check,
    ks_critical,
    ks_statistic,
    normal_cdf,
    student_t_cdf_oracle,
    two_sample_ks,
)
from penet import autodiff as ad
from penet.autodiff import BatchNormState, Tensor
from penet.baselines import cqmle_fit, midpoint_predictor
from penet.cli import main as cli_main
from penet.dataset import read_dataset
from penet.model import PEnetConfig, PEnetModel
from penet.noise import (
    NoiseKind,
    sample_alpha_stable_batch,
    sample_gaussian_increments,
    sample_student_t_batch,
)
from penet.rng import SeededRng
from penet.sde import ParamVector, alpha_stable_family, simulate_ou
from penet.training import evaluate, GroupSpec

pytestmark = pytest.mark.acceptance


def check(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# criterion 1: gradient suite


def test_criterion_1_gradient_suite():
    started = time.monotonic()
    rng = np.random.default_rng(20240810)
    trials = 0
    worst_ops = 0.0

    def run_trials(build_case, count=20):
        nonlocal trials, worst_ops
        for _ in range(count):
            build, tensors = build_case()
            worst, _ = fd_gradient_check(build, tensors, rng, coords_per_tensor=4)
            worst_ops = max(worst_ops, worst)
            trials += 1

    def tensor(*shape, scale=1.0):
        return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)

    def proj_loss(out, shape):
        return ad.sum_all(ad.mul(out, Tensor(rng.standard_normal(shape))))

    def conv_case():
        b, ci, co, length = 2, 3, 4, 11
        x, k, bias = tensor(b, ci, length), tensor(co, ci, 3), tensor(co)
        return (lambda: proj_loss(ad.conv1d(x, k, bias), (b, co, length))), [x, k, bias]

    def pool_case():
        x = tensor(2, 3, 12)
        return (lambda: proj_loss(ad.maxpool1d(x, 2, 2), (2, 3, 6))), [x]

    def lstm_case():
        hidden, b, steps, d_in = 4, 2, 5, 3
        x = tensor(b, steps, d_in, scale=0.7)
        tensors = [x]
        layers = []
        for i in range(2):
            w = tensor(d_in if i == 0 else hidden, 4 * hidden, scale=0.5)
            u = tensor(hidden, 4 * hidden, scale=0.5)
            bias = tensor(4 * hidden, scale=0.2)
            layers.append((w, u, bias))
            tensors += [w, u, bias]
        return (lambda: proj_loss(ad.lstm_forward(x, layers), (b, steps, hidden))), tensors

    def mean_case():
        y = tensor(2, 6, 4)
        return (lambda: proj_loss(ad.mean_pool_time(y), (2, 4))), [y]

    def linear_case():
        x, w, bias = tensor(3, 4), tensor(4, 5), tensor(5)
        return (lambda: proj_loss(ad.linear(x, w, bias), (3, 5))), [x, w, bias]

    def elu_case():
        x = tensor(3, 5)
        return (lambda: proj_loss(ad.elu(x), (3, 5))), [x]

    def sigmoid_case():
        x = tensor(3, 5)
        return (lambda: proj_loss(ad.sigmoid(x), (3, 5))), [x]

    def tanh_case():
        x = tensor(3, 5)
        return (lambda: proj_loss(ad.tanh(x), (3, 5))), [x]

    def bn_case():
        x, g, b = tensor(6, 4), tensor(4, scale=0.5), tensor(4, scale=0.5)
        return (lambda: proj_loss(
            ad.batchnorm(x, g, b, BatchNormState.initial(4), True), (6, 4))), [x, g, b]

    def concat_case():
        v, s = tensor(4, 3), tensor(4)
        return (lambda: proj_loss(ad.concat_scalar(v, s), (4, 4))), [v, s]

    def loss_case():
        pred = tensor(4, 3)
        target = Tensor(rng.standard_normal((4, 3)) + 3.0)
        weights = np.abs(rng.standard_normal(3)) + 0.5
        return (lambda: ad.weighted_l1_loss(pred, target, weights)), [pred]

    for case in (conv_case, pool_case, lstm_case, mean_case, linear_case,
                 elu_case, sigmoid_case, tanh_case, bn_case, concat_case, loss_case):
        run_trials(case)

    check("criterion 1 op gradients", worst_ops < 1e-5,
          f"worst relative error {worst_ops:.3g} over {trials} randomized trials")

    # full forward pass with the reference configuration at N = 64
    worst_net = 0.0
    for seed in (0, 1):
        model = PEnetModel(
            PEnetConfig.for_family(alpha_stable_family(), standardize_input=False),
            seed=seed,
        )
        x = Tensor(rng.standard_normal((3, 64))[:, None, :], requires_grad=True)
        h = rng.uniform(0.005, 0.05, 3)
        proj = rng.standard_normal((3, 3))

        def build():
            return ad.sum_all(ad.mul(model.forward(x, h, training=True), Tensor(proj)))

        worst, _ = fd_gradient_check(build, [x] + model.parameters(), rng,
                                     coords_per_tensor=2)
        worst_net = max(worst_net, worst)
    check("criterion 1 end-to-end gradient", worst_net < 1e-4,
          f"worst relative error {worst_net:.3g}")
    elapsed = time.monotonic() - started
    check("criterion 1 runtime", elapsed < 300.0, f"{elapsed:.0f}s < 300s")


# ---------------------------------------------------------------------------
# criterion 2: sampler suite


def test_criterion_2_sampler_suite():
    started = time.monotonic()
    n = 1_000_000

    draws = sample_gaussian_increments(SeededRng(61), 1.0, n)
    stat = ks_statistic(draws, normal_cdf)
    check("criterion 2 gaussian K-S", stat < ks_critical(n),
          f"stat {stat:.5f} < {ks_critical(n):.5f}")

    for i, nu in enumerate((2.5, 3.0, 4.0)):
        draws = sample_student_t_batch(SeededRng(62 + i), nu, n)
        stat = ks_statistic(draws, student_t_cdf_oracle(nu))
        check(f"criterion 2 t(nu={nu}) K-S", stat < ks_critical(n),
              f"stat {stat:.5f} < {ks_critical(n):.5f}")

    seed = 70
    for alpha in (1.1, 1.5, 1.9):
        draws = sample_alpha_stable_batch(SeededRng(seed), alpha, 1.0, n)
        seed += 1
        for u in (0.5, 1.0, 2.0):
            observed = empirical_cf(draws, u)
            expected = np.exp(-abs(u) ** alpha)
            check(f"criterion 2 ECF alpha={alpha} u={u}",
                  abs(observed - expected) < 0.01,
                  f"|{observed:.4f} - {expected:.4f}| < 0.01")

    stable = sample_alpha_stable_batch(SeededRng(80), 2.0, 1.0, n)
    gauss = np.sqrt(2.0) * sample_gaussian_increments(SeededRng(81), 1.0, n)
    stat, critical = two_sample_ks(stable, gauss)
    check("criterion 2 alpha=2 gaussian equivalence", stat < critical,
          f"two-sample stat {stat:.5f} < {critical:.5f}")

    elapsed = time.monotonic() - started
    check("criterion 2 runtime", elapsed < 600.0, f"{elapsed:.0f}s < 600s")


# ---------------------------------------------------------------------------
# criterion 3: simulator suite


def test_criterion_3_simulator_suite():
    traj = simulate_ou(SeededRng(0), ParamVector(1.0, 0.0), NoiseKind.gaussian(),
                       1000, 1.0 / 1000, 1.0)
    error = abs(traj.values[-1] - np.exp(-1.0))
    check("criterion 3 zero-noise endpoint", error < 2e-3, f"error {error:.2e} < 2e-3")

    def endpoint_error(n):
        t = simulate_ou(SeededRng(0), ParamVector(1.0, 0.0), NoiseKind.gaussian(),
                        n, 1.0 / n, 1.0)
        return abs(t.values[-1] - np.exp(-1.0))

    ratio = endpoint_error(500) / endpoint_error(1000)
    check("criterion 3 first-order h convergence", 1.6 <= ratio <= 2.4,
          f"halving ratio {ratio:.3f} in [1.6, 2.4]")

    eta, eps, h = 2.0, 0.04, 0.002
    root = SeededRng(7)
    endpoints = np.array([
        simulate_ou(root.derive(i), ParamVector(eta, eps), NoiseKind.gaussian(),
                    2500, h, 0.0).values[-1]
        for i in range(10_000)
    ])
    target = eps ** 2 / (2 * eta)
    error = abs(endpoints.var() - target) / target
    check("criterion 3 stationary variance", error < 0.15,
          f"relative error {error:.3f} < 0.15 ({endpoints.var():.3e} vs {target:.3e})")


# ---------------------------------------------------------------------------
# criterion 4: desk-scale alpha-stable experiment


def test_criterion_4_alpha_stable_desk_experiment():
    bundle = artifacts.alpha_stable_artifacts()
    model = artifacts.load_model(bundle["checkpoint"])
    family, records = read_dataset(bundle["test_file"])
    report = evaluate(model, family, records)
    stats = report.groups[0].stats

    truths = np.stack([r.theta.as_array() for r in records])
    midpoint = midpoint_predictor(family).as_array()
    midpoint_mae = np.abs(truths - midpoint).mean(axis=0)

    mae_alpha = stats["alpha"]["mae"]
    check("criterion 4 MAE(alpha) absolute", mae_alpha <= 0.15,
          f"MAE(alpha) {mae_alpha:.4f} <= 0.15 over {len(records)} records")
    check("criterion 4 MAE(alpha) vs midpoint",
          mae_alpha <= 0.7 * midpoint_mae[2],
          f"{mae_alpha:.4f} <= 0.7 x {midpoint_mae[2]:.4f}")
    mae_eps = stats["epsilon"]["mae"]
    check("criterion 4 MAE(epsilon) vs midpoint",
          mae_eps <= 0.7 * midpoint_mae[1],
          f"{mae_eps:.5f} <= 0.7 x {midpoint_mae[1]:.5f}")


# ---------------------------------------------------------------------------
# criterion 5: student-levy comparison against CQMLE


def test_criterion_5_student_levy_comparison():
    bundle = artifacts.student_artifacts()
    model = artifacts.load_model(bundle["checkpoint"])
    family, records = read_dataset(bundle["test_file"])
    groups = [GroupSpec(f"nu={nu:g}", {"nu": nu}) for nu in bundle["groups"]]
    report = evaluate(model, family, records, groups)
    penet_mae = {g.fixed["nu"]: g.stats["nu"]["mae"]
                 for g in report.groups if g.fixed}

    cqmle_rows = np.load(bundle["cqmle_file"])  # columns: true nu, nu_hat
    finite = np.isfinite(cqmle_rows[:, 1])
    check("criterion 5 CQMLE coverage", finite.mean() > 0.95,
          f"{finite.mean():.1%} of CQMLE fits produced a nu estimate")
    cqmle_rows = cqmle_rows[finite]

    for nu in bundle["groups"]:
        mask = cqmle_rows[:, 0] == nu
        cq_mae = np.abs(cqmle_rows[mask, 1] - nu).mean()
        cq_bias = cqmle_rows[mask, 1].mean() - nu
        check(f"criterion 5 MAE ordering at nu={nu:g}",
              penet_mae[nu] < cq_mae,
              f"network {penet_mae[nu]:.4f} < CQMLE {cq_mae:.4f}")
        check(f"criterion 5 CQMLE positive bias at nu={nu:g}",
              cq_bias > 0.0, f"mean bias {cq_bias:+.3f}")


# ---------------------------------------------------------------------------
# criterion 6: CQMLE well-specified recovery


def test_criterion_6_cqmle_recovery():
    started = time.monotonic()
    eta, eps, n, h = 2.0, 0.03, 4000, 0.001
    root = SeededRng(31337)
    etas, epsilons = [], []
    for i in range(200):
        # student-levy nu=1 increments are exactly h x Cauchy
        traj = simulate_ou(root.derive(i), ParamVector(eta, eps),
                           NoiseKind.student_levy(1.0), n, h, 0.5)
        result = cqmle_fit(traj)
        etas.append(result.eta_hat)
        epsilons.append(result.epsilon_hat)
    eta_err = abs(np.median(etas) - eta) / eta
    eps_err = abs(np.median(epsilons) - eps) / eps
    check("criterion 6 drift recovery", eta_err < 0.10,
          f"median eta {np.median(etas):.4f}, relative error {eta_err:.3f} < 0.10")
    check("criterion 6 scale recovery", eps_err < 0.10,
          f"median epsilon {np.median(epsilons):.5f}, relative error {eps_err:.3f} < 0.10")
    elapsed = time.monotonic() - started
    check("criterion 6 runtime", elapsed < 120.0, f"{elapsed:.0f}s < 120s")


# ---------------------------------------------------------------------------
# criterion 7: efficiency of the condensation stage


def test_criterion_7_condensation_efficiency():
    config = PEnetConfig.for_family(alpha_stable_family(), standardize_input=False)
    for n in (64, 200, 400, 3000, 3200, 4000, 3999):
        check_value = (n // 2) // 2
        assert config.condensed_length(n) == check_value
    check("criterion 7 sequence-length arithmetic", True,
          "n' = floor(floor(N/2)/2) over the probe grid")

    gen = np.random.default_rng(0)
    x = gen.standard_normal(3200)
    times = {}
    for use_cnn in (True, False):
        model = PEnetModel(
            PEnetConfig.for_family(alpha_stable_family(), use_cnn=use_cnn,
                                   standardize_input=False),
            seed=0,
        ).eval()
        model.predict([x], [0.003])  # warm up
        reps = []
        for _ in range(3):
            t0 = time.perf_counter()
            model.predict([x], [0.003])
            reps.append(time.perf_counter() - t0)
        times[use_cnn] = min(reps)
    ratio = times[False] / times[True]
    check("criterion 7 wall-time ratio", ratio >= 2.0,
          f"no-CNN / CNN forward time ratio {ratio:.2f} >= 2 at N=3200")


# ---------------------------------------------------------------------------
# criterion 8: end-to-end reproducibility


def test_criterion_8_reproducibility(tmp_path, capsys):
    outputs = []
    for run in range(2):
        root = tmp_path / f"run{run}"
        root.mkdir()
        data = root / "train.lsde"
        test = root / "test.lsde"
        checkpoint = root / "model.penw"
        report = root / "report.jsonl"
        scatter = root / "scatter.csv"
        config = root / "train.cfg"
        assert cli_main(["generate", "--family", "gaussian", "--count", "100",
                         "--seed", "21", "--out", str(data),
                         "--n-range", "32", "48", "--t-range", "4", "8"]) == 0
        assert cli_main(["generate", "--family", "gaussian", "--count", "30",
                         "--seed", "22", "--out", str(test),
                         "--n-range", "32", "48", "--t-range", "4", "8"]) == 0
        config.write_text(
            f"dataset = {data}\nout = {checkpoint}\nbatch_size = 16\n"
            "max_epochs = 3\npatience = 3\nval_fraction = 0.1\nseed = 13\n"
        )
        assert cli_main(["train", "--config", str(config)]) == 0
        assert cli_main(["evaluate", "--checkpoint", str(checkpoint),
                         "--test", str(test), "--out", str(report),
                         "--scatter", str(scatter)]) == 0
        capsys.readouterr()
        outputs.append({
            "dataset": data.read_bytes(),
            "test": test.read_bytes(),
            "checkpoint": checkpoint.read_bytes(),
            "report": report.read_bytes(),
            "scatter": scatter.read_bytes(),
        })
    for key in outputs[0]:
        check(f"criterion 8 {key} bytes identical",
              outputs[0][key] == outputs[1][key],
              f"{len(outputs[0][key])} bytes")
