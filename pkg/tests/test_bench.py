import csv

import numpy as np
import pytest

from r2dn import _kernels as kernels
from r2dn.bench import (
    CSV_COLUMNS,
    BenchRecord,
    backend_comparison,
    count_params,
    matched_ren_q,
    scaling_sweep,
    time_phase,
    write_csv,
)
from r2dn.errors import ParameterError
from r2dn.model import R2DNConfig, init_params
from r2dn.ren import RENConfig
from r2dn.ren import init_params as ren_init_params


class TestCounts:
    def test_count_matches_theta_size(self):
        cfg = R2DNConfig(n=2, m=1, p=1, q=8, l=8, depth=4, width=16)
        assert count_params("r2dn", cfg) == init_params(cfg, 0).size
        rcfg = RENConfig(n=2, m=1, p=1, q=30)
        assert count_params("ren", rcfg) == ren_init_params(rcfg, 0).size

    def test_matched_q_within_ten_percent(self):
        cfg = R2DNConfig(n=1, m=1, p=1, q=16, l=16, depth=6, width=32)
        target = count_params("r2dn", cfg)
        q = matched_ren_q(target)
        got = count_params("ren", RENConfig(n=1, m=1, p=1, q=q))
        assert abs(got - target) / target <= 0.10

    def test_r2dn_count_linear_in_depth(self):
        def count(depth):
            return count_params(
                "r2dn", R2DNConfig(n=1, m=1, p=1, q=16, l=16, depth=depth, width=24)
            )

        # interior layers are identical, so the count is affine in depth
        assert count(5) - count(4) == count(4) - count(3)


class TestTimePhase:
    def test_forward_record_fields(self):
        cfg = R2DNConfig(n=1, m=1, p=1, q=4, l=4, depth=2, width=6)
        params = init_params(cfg, 0)
        rec = time_phase("r2dn", params, cfg, "forward", batch=4, seq_len=8,
                         reps=5, warmup=1)
        assert rec.arch == "r2dn" and rec.phase == "forward"
        assert rec.reps == 5 and rec.size == 6
        assert rec.mean_ms > 0 and rec.p50_ms > 0 and rec.std_ms >= 0
        assert rec.param_count == params.size
        assert rec.calls_per_rep >= 1

    def test_gradient_phase_runs(self):
        cfg = RENConfig(n=1, m=1, p=1, q=6)
        params = ren_init_params(cfg, 0)
        rec = time_phase("ren", params, cfg, "gradient", batch=4, seq_len=6,
                         reps=3, warmup=1)
        assert rec.mean_ms > 0 and rec.size == 6

    def test_longer_sequences_cost_no_less(self):
        cfg = RENConfig(n=1, m=1, p=1, q=20)
        params = ren_init_params(cfg, 0)
        short = time_phase("ren", params, cfg, "forward", batch=8, seq_len=16,
                           reps=10, warmup=2)
        long = time_phase("ren", params, cfg, "forward", batch=8, seq_len=64,
                          reps=10, warmup=2)
        assert long.mean_ms >= short.mean_ms

    def test_unknown_phase(self):
        cfg = R2DNConfig()
        with pytest.raises(ParameterError):
            time_phase("r2dn", init_params(cfg, 0), cfg, "sideways")


class TestSweepAndCSV:
    def test_single_cell_sweep(self):
        recs = scaling_sweep(ren_sizes=(8,), r2dn_sizes=(), batch=2, seq_len=4,
                             reps=2, phases=("forward",))
        assert len(recs) == 1
        assert recs[0].arch == "ren" and recs[0].error is None

    def test_csv_columns_exact(self, tmp_path):
        rec = BenchRecord("ren", 20, "forward", 3, 1.0, 0.1, 0.9, 100)
        path = tmp_path / "bench.csv"
        write_csv([rec], path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["arch", "size", "phase", "reps", "mean_ms", "std_ms",
                           "p50_ms", "param_count", "expressivity"]
        assert rows[0] == CSV_COLUMNS
        assert rows[1][0] == "ren" and rows[1][1] == "20"

    def test_backend_comparison(self):
        recs = backend_comparison(q=16, batch=4, reps=5)
        names = [r.arch for r in recs]
        assert "sweep_python" in names
        if kernels.compiled_backend is not None:
            assert "sweep_cython" in names
        for r in recs:
            assert r.mean_ms > 0 and r.param_count == 16 * 15 // 2
