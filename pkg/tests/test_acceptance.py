"""Acceptance criteria, one test each, at their stated tolerances and time limits.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting. Real-data criteria use 10 seeds and 200 epochs. Batch sizes are
pinned per dataset as the smallest of {500, 2500, 5000} holding the whole
training split.
"""

import json
import time
import zlib
from contextlib import contextmanager
from dataclasses import replace
from functools import cache
from pathlib import Path

import numpy as np
import pytest

from autosmote import experiment as ex
from autosmote import gradcore as gc
from autosmote.aggregators import candidate_table
from autosmote.cli import main
from autosmote.dataset import load_csv
from autosmote.gumbel import gumbel_softmax
from autosmote.learnable import SelfSampler
from autosmote.metrics import average_rank, compute
from autosmote.oversamplers import OversamplePlan, borderline_seeds, smote

from conftest import VERDICTS
from gradcheck import numeric_grad, rel_error
from test_aggregators import o_avg, o_interp, o_max, o_min, o_sum, o_weighted
from test_gradcore import OPS, _random_case
from test_learnable import _end_to_end, imbalanced, in_hull
from test_metrics import brute
from test_oversamplers import LINE12, blobs, on_some_segment

pytestmark = pytest.mark.slow

DATA = Path(__file__).parent / "data"
DATASETS = {
    "wisconsin": ("wisconsin.csv", "diagnosis", 500),
    "diabetes": ("diabetes.csv", "class", 2500),
    "glass": ("glass.csv", "type", 500),
    "yeast1": ("yeast1.csv", "class", 2500),
}


@contextmanager
def criterion(n: int, title: str, limit: float | None = None):
    """Times the block and records one verdict line whatever the outcome."""
    start = time.perf_counter()
    info: dict = {}
    try:
        yield info
        seconds = time.perf_counter() - start
        if limit is not None:
            assert seconds < limit, f"took {seconds:.0f}s, limit {limit:.0f}s"
    except BaseException as exc:
        seconds = time.perf_counter() - start
        VERDICTS.append(f"[FAIL] {n:2d}. {title} ({seconds:.1f}s): {info.get('detail', '')} {exc}".rstrip())
        raise
    VERDICTS.append(f"[PASS] {n:2d}. {title} ({seconds:.1f}s): {info.get('detail', '')}".rstrip())


def config(name: str, method: str, **kw) -> ex.ExperimentConfig:
    path, label, batch = DATASETS[name]
    return ex.ExperimentConfig(data=str(DATA / path), label_col=label, method=method,
                               batch_size=batch, **kw)


@cache
def raw(name):
    path, label, _ = DATASETS[name]
    return load_csv(DATA / path, label)


@cache
def result(name: str, method: str) -> dict:
    """Full search for ``method`` on ``name`` with default protocol settings."""
    return ex.run(config(name, method), raw(name), track_test=False)


def mean_f1(rec) -> float:
    return rec["best"]["summary"]["f1"]["mean"]


def test_c01_gradient_correctness():
    with criterion(1, "finite-difference gradients, ops < 1e-3, end to end < 1e-2", 60) as info:
        worst_op = 0.0
        for op in OPS:
            rng = np.random.default_rng(zlib.crc32(op.encode()) + 1)
            for _ in range(8):
                params, build = _random_case(op, rng)
                gc.backward(build())
                for p in params:
                    num = numeric_grad(lambda: float(build().value[0, 0]), p.value)
                    worst_op = max(worst_op, rel_error(p.grad, num))
        worst_e2e = 0.0
        s, model, build = _end_to_end(SelfSampler)
        gc.backward(build())
        for p in list(model.params) + s.heads["dc1"].params + s.heads["dc3"].params:
            num = numeric_grad(lambda: float(build().value[0, 0]), p.value)
            worst_e2e = max(worst_e2e, rel_error(p.grad, num))
        info["detail"] = f"worst op {worst_op:.1e}, worst end-to-end {worst_e2e:.1e}"
        assert worst_op < 1e-3 and worst_e2e < 1e-2


def test_c02_gumbel_max_fidelity():
    with criterion(2, "Gumbel-max frequencies within 0.01 of softmax over 1e5 draws", 10) as info:
        logits = np.array([0.3, -1.2, 1.5, 0.0, 0.9, -0.4])
        n = 100_000
        s = gumbel_softmax(np.tile(logits, (n, 1)), 1.0, np.random.default_rng(2024))
        freq = np.bincount(s.hard_index, minlength=len(logits)) / n
        expect = np.exp(logits) / np.exp(logits).sum()
        gap = float(np.max(np.abs(freq - expect)))
        info["detail"] = f"max gap {gap:.4f}"
        assert gap <= 0.01


def test_c03_aggregator_oracles():
    with criterion(3, "six aggregators match brute force to 1e-12 on 1000 fixtures", 10) as info:
        rng = np.random.default_rng(33)
        S, K, f = 1000, 6, 5
        seeds, neigh = rng.random((S, f)), rng.random((S, K, f))
        k = rng.integers(1, K + 1, size=S)
        lam = rng.random(S)
        partner = (rng.random(S) * k).astype(int)
        table = candidate_table(seeds, neigh, k, lam, partner)
        worst = 0.0
        for i in range(S):
            x, nb = seeds[i], neigh[i, :k[i]]
            ref = [o_interp(x, nb, lam[i], partner[i]), o_max(x, nb), o_min(x, nb),
                   o_sum(x, nb), o_avg(x, nb), o_weighted(x, nb)]
            worst = max(worst, max(float(np.max(np.abs(table[i, j] - ref[j]))) for j in range(6)))
        info["detail"] = f"max deviation {worst:.1e}"
        assert worst <= 1e-12


def test_c04_sampler_geometry():
    with criterion(4, "SMOTE on segments, mixtures in hull, borderline danger set", 30) as info:
        d = blobs([80, 20], f=3, seed=9)
        k = 5
        out = smote(d, OversamplePlan.balance(d, 1), k)
        mx = d.features[d.class_rows(1)]
        on_seg = 0
        synth = out.features[d.n_rows:]
        for i, p in enumerate(synth):
            s = mx[i % len(mx)]
            dist = np.linalg.norm(mx - s, axis=1)
            dist[i % len(mx)] = np.inf
            on_seg += on_some_segment(p, s, mx[np.argsort(dist, kind="stable")[:k]])
        in_h = total = 0
        for seed in range(20):
            dd = imbalanced(seed=seed)
            sampler = SelfSampler(dd, np.random.default_rng(seed))
            batch = sampler.generate(dd.class_rows(1), np.random.default_rng(seed + 50))
            for i in range(len(batch.seeds)):
                total += 1
                in_h += in_hull(batch.features.value[i], batch.candidates[i])
        danger = borderline_seeds(LINE12, 1, 4).tolist()
        info["detail"] = (f"segments {on_seg}/{len(synth)}, hull {in_h}/{total}, "
                          f"danger seeds {danger}")
        assert on_seg == len(synth) and in_h == total and danger == [7, 8]


def test_c05_metrics_oracle():
    with criterion(5, "metrics match brute force to 1e-12 on 500 fixtures; rank-sum identity", 10) as info:
        rng = np.random.default_rng(55)
        worst = 0.0
        for _ in range(500):
            n = int(rng.integers(2, 8))
            m = int(rng.integers(1, 100))
            truth, preds = rng.integers(n, size=m), rng.integers(n, size=m)
            rep, ref = compute(preds, truth, n), brute(preds.tolist(), truth.tolist(), n)
            worst = max(worst, abs(rep.macro_precision - ref["p"]), abs(rep.macro_recall - ref["r"]),
                        abs(rep.macro_f1 - ref["f"]))
        methods = [f"m{i}" for i in range(7)]
        table = {m: {f"d{j}": (None if rng.random() < 0.1 else
                               dict(zip(("precision", "recall", "f1"), np.round(rng.random(3), 1))))
                     for j in range(6)} for m in methods}
        ranks = average_rank(table)
        M = len(methods)
        sums_ok = all(sum(ranks[m]["per_dataset"][metric][f"d{j}"] for m in methods) == M * (M + 1) / 2
                      for metric in ("precision", "recall", "f1") for j in range(6))
        info["detail"] = f"max deviation {worst:.1e}, rank sums {'ok' if sums_ok else 'broken'}"
        assert worst <= 1e-12 and sums_ok


def test_c06_wisconsin():
    with criterion(6, "Wisconsin self and cohort mean F1 in [95.0, 99.5]", 600) as info:
        f_self = 100 * mean_f1(result("wisconsin", "autosmote-self"))
        f_cohort = 100 * mean_f1(result("wisconsin", "autosmote-cohort"))
        info["detail"] = f"self {f_self:.2f}, cohort {f_cohort:.2f}"
        assert 95.0 <= f_self <= 99.5 and 95.0 <= f_cohort <= 99.5


def test_c07_diabetes():
    with criterion(7, "Diabetes cohort mean F1 in [68, 77]", 600) as info:
        f = 100 * mean_f1(result("diabetes", "autosmote-cohort"))
        info["detail"] = f"cohort {f:.2f}"
        assert 68.0 <= f <= 77.0


def test_c08_ordering():
    with criterion(8, "cohort >= self >= MLP-oversampler mean F1 on >= 2 of 3 datasets") as info:
        held, parts = 0, []
        for name in ("glass", "diabetes", "yeast1"):
            c, s, m = (mean_f1(result(name, meth))
                       for meth in ("autosmote-cohort", "autosmote-self", "mlp-oversampler"))
            ok = c >= s >= m
            held += ok
            parts.append(f"{name} {100 * c:.2f}/{100 * s:.2f}/{100 * m:.2f}{'' if ok else ' x'}")
        info["detail"] = f"{held}/3 hold; " + ", ".join(parts)
        assert held >= 2


def test_c09_generalization_curves():
    with criterion(9, "Glass final train error: MLP-oversampler < 0.02, both AutoSMOTE > 0.05", 300) as info:
        final = {}
        for meth in ("mlp-oversampler", "autosmote-self", "autosmote-cohort"):
            curves = result("glass", meth)["best"]["curves"]
            assert all(len(c["train_error"]) == 200 for c in curves)
            final[meth] = float(np.mean([c["train_error"][-1] for c in curves]))
        info["detail"] = ", ".join(f"{m} {v:.3f}" for m, v in final.items())
        assert final["mlp-oversampler"] < 0.02
        assert final["autosmote-self"] > 0.05 and final["autosmote-cohort"] > 0.05


def test_c10_ablation_direction():
    with criterion(10, "Glass: removing DC2 and removing DC3 each lower F1 in >= 7 of 10 seeds") as info:
        base = result("glass", "autosmote-self")
        base_f1 = [s["metrics"]["f1"] for s in base["best"]["seeds"]]
        counts = {}
        for flag in ("dc2", "dc3"):
            cfg = config("glass", "autosmote-self", ablate=[flag])
            rec = ex.run(cfg, raw("glass"), track_test=False)
            f1 = [s["metrics"]["f1"] for s in rec["best"]["seeds"]]
            assert [s["seed"] for s in rec["best"]["seeds"]] == [s["seed"] for s in base["best"]["seeds"]]
            counts[flag] = (sum(a < b for a, b in zip(f1, base_f1)), 100 * mean_f1(rec))
        info["detail"] = (f"baseline {100 * mean_f1(base):.2f}; " +
                          ", ".join(f"without {k}: {n}/10 lower, mean {m:.2f}" for k, (n, m) in counts.items()))
        assert all(n >= 7 for n, _ in counts.values())


def test_c11_determinism(tmp_path):
    with criterion(11, "repeated run gives bit-identical metrics JSON") as info:
        path, label, batch = DATASETS["glass"]
        argv = ["run", "--data", str(DATA / path), "--label-col", label, "--method", "autosmote-cohort",
                "--groups", "1-3", "--seeds", "0-9", "--batch-size", str(batch), "--out", str(tmp_path)]
        blobs_ = []
        for _ in range(2):
            assert main(argv) == 0
            blobs_.append((tmp_path / "metrics.json").read_bytes())
        info["detail"] = f"{len(blobs_[0])} bytes, f1 {json.loads(blobs_[0])['best']['summary']['f1']['mean']:.4f}"
        assert blobs_[0] == blobs_[1]
