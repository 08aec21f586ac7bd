import json
import statistics
import time

import pytest

from ganlab.bench import (
    FAMILIES,
    REFERENCE_TIMES,
    BenchConfig,
    BenchmarkInvalid,
    FrameworkWorkload,
    TimingResult,
    baseline_loop,
    bench_dataset,
    check_equivalence,
    format_table,
    overhead_report,
    run_benchmark,
    time_interleaved,
    time_run,
    write_report,
)
from ganlab.errors import ContractError


def small(family, **kw):
    n = 1280 if family == "wgangp" else 256  # ten batches, so the critic cadence completes twice
    return BenchConfig(family, **{"n_samples": n, "width": 4, **kw})


def test_sleep_workload_timing():
    res = time_run(lambda: time.sleep(0.1), repetitions=8, warmup=1, label="sleep")
    assert len(res.runs) == 8 and res.warmup_runs == 1
    assert 0.1 <= res.mean <= 0.13 and res.std < 0.02


def test_warmup_not_timed():
    calls = []
    res = time_run(lambda: calls.append(1), repetitions=3, warmup=2)
    assert len(calls) == 5 and len(res.runs) == 3


def test_single_run_has_zero_std():
    assert time_run(lambda: None, repetitions=1, warmup=0).std == 0.0


def test_statistics_recomputable():
    res = TimingResult("x", [1.0, 2.0, 4.0])
    d = res.to_dict()
    assert d["mean"] == statistics.fmean(d["runs"]) and d["std"] == statistics.stdev(d["runs"])


def test_workload_error_surfaces():
    def boom():
        raise RuntimeError("workload failed")

    with pytest.raises(RuntimeError, match="workload failed"):
        time_run(boom, repetitions=2)


def test_bad_repetitions():
    with pytest.raises(ContractError):
        time_run(lambda: None, repetitions=0)


def test_interleaved_alternates():
    order = []
    fw, bl = time_interleaved(lambda: order.append("f"), lambda: order.append("b"), repetitions=4, warmup=0,
                              label="x")
    assert order == ["f", "b", "b", "f", "f", "b", "b", "f"]
    assert (fw.loop, bl.loop) == ("framework", "baseline") and len(fw.runs) == len(bl.runs) == 4


@pytest.mark.parametrize(
    "fw, bl, ratio",
    [(10.0, 10.0, 1.0), (15.9, 16.7, 15.9 / 16.7), (86.0, 87.0, 86.0 / 87.0)],
)
def test_overhead_ratio(fw, bl, ratio):
    rep = overhead_report(TimingResult("m", [fw]), TimingResult("m", [bl]))
    assert rep.ratio == pytest.approx(ratio, abs=1e-12)
    assert "ratio" in rep.table and "framework" in rep.table


def test_reference_ratios():
    assert 15.9 / 16.7 == pytest.approx(0.952, abs=1e-3)
    assert 86.0 / 87.0 == pytest.approx(0.989, abs=1e-3)


def test_mismatched_labels():
    with pytest.raises(ContractError):
        overhead_report(TimingResult("a", [1.0]), TimingResult("b", [1.0]))


def test_reference_times_documentation_only():
    assert set(REFERENCE_TIMES) == set(FAMILIES)
    assert REFERENCE_TIMES["dcgan"]["framework"] == (15.9, 0.64)


def test_unknown_family():
    with pytest.raises(ContractError):
        BenchConfig("stylegan")


@pytest.mark.parametrize("family", FAMILIES)
def test_framework_matches_baseline(family):
    cfg = small(family)
    same, (fw_updates, bl_updates) = check_equivalence(cfg, bench_dataset(cfg))
    assert same and fw_updates == bl_updates > 0


def test_wgangp_critic_cadence():
    cfg = small("wgangp")
    _, (updates, _) = check_equivalence(cfg, bench_dataset(cfg))
    assert updates == (1280 // 128) // 5 == 2


def test_seed_changes_hashes():
    hashes = []
    for seed in (0, 1):
        cfg = small("dcgan", seed=seed)
        fw = FrameworkWorkload(cfg, bench_dataset(cfg))
        fw()
        hashes.append(fw.hashes())
    assert hashes[0]["generator"] != hashes[1]["generator"]


def test_divergent_pair_refused(monkeypatch):
    import ganlab.bench as bench

    real = bench.baseline_loop

    def skewed(cfg, data, epochs=1):
        loop = real(cfg, data, epochs)
        loop.opt_g.param_groups[0]["lr"] *= 2
        return loop

    monkeypatch.setattr(bench, "baseline_loop", skewed)
    with pytest.raises(BenchmarkInvalid):
        run_benchmark(small("dcgan"), repetitions=1, warmup=0)


def test_report_files(tmp_path):
    res = run_benchmark(small("dcgan"), repetitions=2, warmup=0)
    assert res.equivalent and len(res.framework.runs) == 2
    table = write_report([res], tmp_path / "bench.txt")
    assert (tmp_path / "bench.txt").read_text().strip() == table
    (line,) = (tmp_path / "bench.txt.jsonl").read_text().splitlines()
    rec = json.loads(line)
    assert rec["family"] == "dcgan" and rec["ratio"] == pytest.approx(res.ratio)
    assert format_table([(res.framework, res.baseline)]) == table
