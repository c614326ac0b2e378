import numpy as np
import pytest
from scipy.stats import spearmanr

from latalign.alignment import AlignmentConfig
from latalign.denoiser import GaussianMixtureDenoiser, GuidanceConfig, gm_class_posterior
from latalign.editor import (EditRequest, UnsupportedCombination, run_edit, run_mixed_edit, run_reconstruction,
                             run_sdedit_baseline)
from latalign.experiments import ToyBench
from latalign.grid import RngStream
from latalign.presets import layout_spec, separated_1d_spec, three_component_1d_spec
from latalign.schedule import build_schedule

SCHED = build_schedule(1000, "linear-beta", 50)
SEP = separated_1d_spec()
SEP_MODEL = GaussianMixtureDenoiser(SEP)
LAYOUT = layout_spec(shape=(4, 4), class_offset=1.5, variance=0.04)
LAYOUT_MODEL = GaussianMixtureDenoiser(LAYOUT)


def layout_ref(seed=0, cls=0):
    return LAYOUT.sample(RngStream(1000 + seed), cls)


def test_unconditional_sampling_lands_in_support():
    hits = 0
    for seed in range(100):
        req = EditRequest(reference=np.zeros(1), target=None, guidance=GuidanceConfig(0.0), seed=seed,
                          alignment=AlignmentConfig(mode="none"))
        out, _ = run_edit(req, SEP_MODEL, SCHED)
        hits += max(gm_class_posterior(out, k, SEP) for k in SEP.classes) > 0.99
    assert hits == 100


@pytest.mark.parametrize("mode", ["pred-x0", "input", "epsilon-scaled"])
@pytest.mark.parametrize("target,scale", [(None, 0.0), (1, 10.0)])
def test_reconstruction_modes_exact(mode, target, scale):
    for seed in range(3):
        ref = layout_ref(seed)
        out = run_reconstruction(ref, LAYOUT_MODEL, SCHED, mode=mode, seed=seed, target=target,
                                 guidance=GuidanceConfig(scale))
        assert np.max(np.abs(out - ref)) <= 1e-8


def test_literal_epsilon_reconstruction_is_measured():
    ref = layout_ref(0)
    out = run_reconstruction(ref, LAYOUT_MODEL, SCHED, mode="epsilon", seed=0)
    dev = float(np.max(np.abs(out - ref)))
    print(f"literal epsilon reconstruction max-abs deviation: {dev:.4g}")
    assert np.isfinite(dev)


@pytest.mark.parametrize("mode,sampler", [("pred-x0", "ddim"), ("input", "ddim"), ("input", "ddpm"),
                                          ("epsilon", "ddpm"), ("epsilon-scaled", "ddim")])
def test_determinism_bitwise(mode, sampler):
    req = EditRequest(reference=layout_ref(1), target=1, guidance=GuidanceConfig(3.0), seed=5, sampler=sampler,
                      alignment=AlignmentConfig(mode=mode), snapshot_every=7)
    out1, tr1 = run_edit(req, LAYOUT_MODEL, SCHED)
    out2, tr2 = run_edit(req, LAYOUT_MODEL, SCHED)
    assert out1.tobytes() == out2.tobytes()
    assert tr1.to_csv() == tr2.to_csv()
    for r1, r2 in zip(tr1.records, tr2.records):
        assert r1.pred_x0.tobytes() == r2.pred_x0.tobytes()
        assert r1.eps_used.tobytes() == r2.eps_used.tobytes()


@pytest.mark.parametrize("mode", ["pred-x0", "input", "epsilon", "epsilon-scaled"])
def test_never_aligned_runs_ignore_the_reference(mode):
    outs = []
    for ref in (layout_ref(0), layout_ref(1, 1)):
        req = EditRequest(reference=ref, target=1, guidance=GuidanceConfig(3.0), seed=2,
                          alignment=AlignmentConfig(mode=mode, K=1000))
        outs.append(run_edit(req, LAYOUT_MODEL, SCHED)[0])
    assert outs[0].tobytes() == outs[1].tobytes()


@pytest.mark.parametrize("mode", ["epsilon", "epsilon-scaled", "pred-x0"])
def test_symmetry_breaking_neutral_at_zero_beta(mode):
    base = dict(reference=layout_ref(0), target=1, guidance=GuidanceConfig(3.0), seed=4)
    plain = run_edit(EditRequest(**base, alignment=AlignmentConfig(mode="none")), LAYOUT_MODEL, SCHED)[0]
    sb = run_edit(EditRequest(**base, alignment=AlignmentConfig(mode=mode, beta_value=0.0, symmetry_breaking=True)),
                  LAYOUT_MODEL, SCHED)[0]
    assert sb.tobytes() == plain.tobytes()


def test_symmetry_breaking_changes_epsilon_mode():
    base = dict(reference=layout_ref(0), target=1, guidance=GuidanceConfig(3.0), seed=4)
    a = run_edit(EditRequest(**base, alignment=AlignmentConfig(mode="epsilon-scaled")), LAYOUT_MODEL, SCHED)[0]
    b = run_edit(EditRequest(**base, alignment=AlignmentConfig(mode="epsilon-scaled", symmetry_breaking=True)),
                 LAYOUT_MODEL, SCHED)[0]
    assert not np.array_equal(a, b)


def test_trace_records():
    req = EditRequest(reference=layout_ref(0), target=1, seed=0, snapshot_every=10)
    out, trace = run_edit(req, LAYOUT_MODEL, SCHED)
    ts = [r.t for r in trace.records]
    assert len(trace) == len(SCHED.pairs()) and all(a > b for a, b in zip(ts, ts[1:]))
    assert [r.x_t is not None for r in trace.records][:11] == [True] + [False] * 9 + [True]
    for r in trace.records:
        assert r.beta == (0.3 if r.t > 200 else 0.0)
        assert r.pred_x0.shape == (4, 4) and np.all(np.isfinite(r.eps_raw))
    lines = trace.to_csv(["config_hash: x"]).splitlines()
    assert lines[0] == "# config_hash: x" and lines[1] == "step,t,alpha_bar,beta,preservation_mse"
    assert len(lines) == 2 + len(trace)


def test_invalid_requests():
    with pytest.raises(UnsupportedCombination):
        run_edit(EditRequest(reference=layout_ref(0), target=1, sampler="ddpm"), LAYOUT_MODEL, SCHED)
    with pytest.raises(ValueError):
        run_edit(EditRequest(reference=np.zeros(3), target=1), LAYOUT_MODEL, SCHED)
    with pytest.raises(ValueError):
        run_edit(EditRequest(reference=layout_ref(0), sampler="euler"), LAYOUT_MODEL, SCHED)
    with pytest.raises(ValueError):
        run_edit(EditRequest(reference=layout_ref(0), alignment=AlignmentConfig(K=5000)), LAYOUT_MODEL, SCHED)


def test_layout_edit_reaches_target_and_stays_closer_than_free_generation():
    bench = ToyBench(guidance=GuidanceConfig(10.0))
    ok = 0
    for i, ref in enumerate(bench.references):
        out, _ = run_edit(EditRequest(ref, 1, bench.guidance, i), bench.model, bench.schedule)
        free, _ = run_edit(EditRequest(ref, 1, bench.guidance, i, alignment=AlignmentConfig(K=1000)),
                           bench.model, bench.schedule)
        ok += gm_class_posterior(out, 1, bench.spec) > 0.9 and np.linalg.norm(out - ref) < np.linalg.norm(free - ref)
    assert ok >= 0.8 * len(bench.references)


@pytest.mark.xfail(strict=True, reason="in 1-D the guided noise estimate in the direction term drags the output "
                                        "past the reference, away from the target class")
def test_one_dimensional_default_edit():
    ok = 0
    for i in range(20):
        ref = SEP.sample(RngStream(500 + i), 0)
        out, _ = run_edit(EditRequest(ref, 1, GuidanceConfig(10.0), i), SEP_MODEL, SCHED)
        ok += gm_class_posterior(out, 1, SEP) > 0.9 and abs(out[0] - ref[0]) < 6.0
    assert ok == 20


# --- noise-injection baseline -------------------------------------------------

def test_sdedit_injection_at_zero_returns_reference():
    ref = layout_ref(0)
    out = run_sdedit_baseline(ref, 0, 1, LAYOUT_MODEL, SCHED, seed=3)
    assert out.tobytes() == ref.tobytes()


def test_sdedit_injection_at_T_ignores_reference():
    a = run_sdedit_baseline(layout_ref(0), 1000, 1, LAYOUT_MODEL, SCHED, seed=3)
    b = run_sdedit_baseline(layout_ref(1, 1), 1000, 1, LAYOUT_MODEL, SCHED, seed=3)
    assert np.max(np.abs(a - b)) < 1e-3


def test_sdedit_preservation_monotone_in_injection():
    bench = ToyBench(n_seeds=10)
    ts = sorted(SCHED.step_indices[::6])
    errs = []
    for t in ts:
        errs.append(np.mean([r.preservation_mse for r in bench.sdedit(t)]))
    assert spearmanr(ts, errs).statistic >= 0.9


def test_sdedit_rejects_unvisited_step_and_is_deterministic():
    with pytest.raises(ValueError):
        run_sdedit_baseline(layout_ref(0), 201, 1, LAYOUT_MODEL, SCHED)
    a = run_sdedit_baseline(layout_ref(0), 490, 1, LAYOUT_MODEL, SCHED, seed=1)
    assert a.tobytes() == run_sdedit_baseline(layout_ref(0), 490, 1, LAYOUT_MODEL, SCHED, seed=1).tobytes()


# --- semantic mixing ---------------------------------------------------------

@pytest.mark.parametrize("mode", ["pred-x0", "input"])
def test_mixing_with_full_mask_equals_aligned_run(mode):
    base = dict(reference=layout_ref(2), target=1, guidance=GuidanceConfig(3.0), seed=8,
                alignment=AlignmentConfig(mode=mode))
    mixed, _ = run_mixed_edit(EditRequest(**base, mask=np.ones((4, 4)), mixing=True), LAYOUT_MODEL, SCHED)
    plain, _ = run_edit(EditRequest(**base), LAYOUT_MODEL, SCHED)
    assert mixed.tobytes() == plain.tobytes()


@pytest.mark.parametrize("mode", ["pred-x0", "input"])
def test_mixing_with_empty_mask_equals_free_run(mode):
    base = dict(reference=layout_ref(2), target=1, guidance=GuidanceConfig(3.0), seed=8)
    mixed, _ = run_mixed_edit(EditRequest(**base, alignment=AlignmentConfig(mode=mode), mask=np.zeros((4, 4)),
                                          mixing=True), LAYOUT_MODEL, SCHED)
    free, _ = run_edit(EditRequest(**base, alignment=AlignmentConfig(mode="none")), LAYOUT_MODEL, SCHED)
    assert mixed.tobytes() == free.tobytes()


def test_mixing_via_run_edit_and_errors():
    base = dict(reference=layout_ref(2), target=1, seed=1)
    a, _ = run_edit(EditRequest(**base, mask=np.ones((4, 4)), mixing=True), LAYOUT_MODEL, SCHED)
    b, _ = run_mixed_edit(EditRequest(**base, mask=np.ones((4, 4)), mixing=True), LAYOUT_MODEL, SCHED)
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ValueError):
        run_mixed_edit(EditRequest(**base, mixing=True), LAYOUT_MODEL, SCHED)
    with pytest.raises(ValueError):
        run_mixed_edit(EditRequest(**base, mask=np.full((4, 4), 2.0), mixing=True), LAYOUT_MODEL, SCHED)
    with pytest.raises(UnsupportedCombination):
        run_mixed_edit(EditRequest(**base, mask=np.ones((4, 4)), mixing=True, sampler="ddpm",
                                   alignment=AlignmentConfig(mode="input")), LAYOUT_MODEL, SCHED)
