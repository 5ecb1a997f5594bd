import numpy as np
import pytest

from lowrank_iht.experiments import (
    ConfigError,
    ExperimentConfig,
    compute_metrics,
    read_csv,
    reaggregate,
    run_experiment,
    run_matrix_experiment,
    run_sparse_experiment,
)
from lowrank_iht.experiments import _rep_seed


def test_compute_metrics_hand_example():
    theta_hat = np.array([[3.0, 4.0], [0.0, 0.0]])
    theta = np.zeros((2, 2))
    fro_sq, op, ent, s1 = compute_metrics(theta_hat, theta)
    # rank-one difference: operator and nuclear norms coincide at 5
    assert fro_sq == pytest.approx(25.0, rel=1e-12)
    assert op == pytest.approx(5.0, rel=1e-12)
    assert ent == pytest.approx(4.0, rel=1e-12)
    assert s1 == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(ValueError):
        compute_metrics(np.zeros((2, 2)), np.zeros((3, 3)))


def test_compute_metrics_against_numpy_oracles():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        b = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        fro_sq, op, ent, s1 = compute_metrics(a, b)
        diff = a - b
        svals = np.linalg.svd(diff, compute_uv=False)
        assert fro_sq == pytest.approx(float(np.sum(np.abs(diff) ** 2)), rel=1e-10)
        assert op == pytest.approx(float(svals[0]), rel=1e-10)
        assert ent == pytest.approx(float(np.max(np.abs(diff))), rel=1e-10)
        assert s1 == pytest.approx(float(svals.sum()), rel=1e-10)


def _matrix_config(out, **overrides):
    base = dict(mode="matrix_sim", output_dir=str(out), replicates=2, seed=7,
                d_values=(6,), k_values=(1,), n_values=(40,))
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="bogus", output_dir="x", d_values=(4,),
                         k_values=(1,), n_values=(10,))
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="matrix_sim", output_dir="", d_values=(4,),
                         k_values=(1,), n_values=(10,))
    with pytest.raises(ConfigError):
        _matrix_config("x", replicates=0)
    with pytest.raises(ConfigError):
        _matrix_config("x", seed=-1)
    with pytest.raises(ConfigError):
        _matrix_config("x", noise_std=-1.0)
    with pytest.raises(ConfigError):
        _matrix_config("x", level=1.5)
    with pytest.raises(ConfigError):
        _matrix_config("x", design="wavelet")
    with pytest.raises(ConfigError):
        _matrix_config("x", n_values=())
    with pytest.raises(ConfigError):
        _matrix_config("x", k_values=(9,))  # exceeds d=6
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="sparse", output_dir="x", p_values=(5,),
                         k_values=(9,), n_values=(10,))
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="quantum", output_dir="x", m_values=(2,),
                         k_values=(1,), alpha_values=(), t_factors=(2,))


def test_from_dict_nested_and_unknown_keys():
    config = ExperimentConfig.from_dict({
        "mode": "matrix_sim", "output_dir": "out", "replicates": 3,
        "d_values": [8], "k_values": [2], "n_values": [100],
        "iht": {"rho": 0.4, "upsilon": 0.01, "t0": 2.0},
    })
    assert config.iht.rho == 0.4
    assert config.iht.upsilon == 0.01
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"mode": "matrix_sim", "output_dir": "o",
                                    "d_values": [4], "k_values": [1],
                                    "n_values": [10], "granularity": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"mode": "matrix_sim", "output_dir": "o",
                                    "d_values": [4], "k_values": [1],
                                    "n_values": [10], "iht": {"rho": 2.0}})


def test_basis_design_sets_n_to_d_squared():
    config = ExperimentConfig(mode="matrix_sim", output_dir="o", design="basis",
                              d_values=(4, 6), k_values=(1,))
    assert [c["n"] for c in config.cells()] == [16, 36]


def test_quantum_setting_overdemand_warns():
    with pytest.warns(RuntimeWarning, match="distinct"):
        ExperimentConfig(mode="quantum", output_dir="o", m_values=(1,),
                         k_values=(1,), alpha_values=(4.0,), t_factors=(2.0,))


def test_rep_seeds_are_distinct_streams():
    config = _matrix_config("o")
    draws = set()
    for cell_idx in range(3):
        for rep_idx in range(3):
            rng = np.random.default_rng(_rep_seed(config, cell_idx, rep_idx))
            draws.add(float(rng.random()))
    assert len(draws) == 9


def test_run_twice_is_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run_matrix_experiment(_matrix_config(out_a))
    run_matrix_experiment(_matrix_config(out_b))
    for name in ("metrics.csv", "aggregate.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    # timings are wall-clock and live apart precisely so the above can hold
    assert (out_a / "timings.csv").exists()


def test_workers_do_not_change_outputs(tmp_path):
    out_serial = tmp_path / "serial"
    out_pool = tmp_path / "pool"
    run_matrix_experiment(_matrix_config(out_serial, workers=1))
    run_matrix_experiment(_matrix_config(out_pool, workers=2))
    assert (out_serial / "metrics.csv").read_bytes() == \
        (out_pool / "metrics.csv").read_bytes()
    assert (out_serial / "aggregate.csv").read_bytes() == \
        (out_pool / "aggregate.csv").read_bytes()


def test_schema_line_and_parsed_types(tmp_path):
    config = _matrix_config(tmp_path)
    paths = run_matrix_experiment(config)
    first = open(paths["metrics"]).readline().rstrip("\n")
    assert first == "# schema=1"
    columns, rows = read_csv(paths["metrics"])
    assert columns[:4] == ["d", "k", "n", "replicate"]
    assert len(rows) == 2
    row = rows[0]
    assert isinstance(row["d"], int) and row["d"] == 6
    assert isinstance(row["frobenius_sq"], float)
    assert isinstance(row["rank_hat"], int)
    assert 0.0 <= row["coverage"] <= 1.0


def test_quantum_rows_leave_coverage_empty(tmp_path):
    config = ExperimentConfig(mode="quantum", output_dir=str(tmp_path),
                              replicates=1, seed=3, m_values=(2,),
                              k_values=(1,), alpha_values=(2.0,),
                              t_factors=(3.0,))
    paths = run_experiment(config)
    columns, rows = read_csv(paths["metrics"])
    assert rows[0]["coverage"] is None
    assert rows[0]["mean_ci_length"] is None
    assert rows[0]["frobenius_sq"] >= 0.0
    assert isinstance(rows[0]["alpha"], float)


def test_noiseless_basis_run_is_exact(tmp_path):
    config = ExperimentConfig.from_dict({
        "mode": "matrix_sim", "output_dir": str(tmp_path), "replicates": 3,
        "seed": 11, "noise_std": 0.0, "design": "basis",
        "d_values": [6], "k_values": [1],
        "iht": {"upsilon": 1e-9, "t0": 10.0},
    })
    paths = run_matrix_experiment(config)
    _, rows = read_csv(paths["metrics"])
    assert len(rows) == 3
    for row in rows:
        assert row["frobenius_sq"] < 1e-16
        assert row["rank_hat"] == 1


def test_sparse_experiment_outputs(tmp_path):
    config = ExperimentConfig(mode="sparse", output_dir=str(tmp_path),
                              replicates=2, seed=5, p_values=(30,),
                              k_values=(2,), n_values=(200,))
    paths = run_sparse_experiment(config)
    columns, rows = read_csv(paths["metrics"])
    assert columns[:4] == ["p", "k", "n", "replicate"]
    assert len(rows) == 2
    for row in rows:
        assert row["support_included"] in (0, 1)
        assert 0.0 <= row["coverage"] <= 1.0
        assert row["l2_sq"] >= 0.0
    _, coords = read_csv(paths["coordinates"])
    assert len(coords) == 2 * 30
    assert sum(c["in_support"] for c in coords) == 2 * 2
    for c in coords[:5]:
        assert c["ci_lower"] <= c["theta_hat"] <= c["ci_upper"]


def test_reaggregate_reproduces_aggregate(tmp_path):
    config = _matrix_config(tmp_path / "run", replicates=3)
    paths = run_matrix_experiment(config)
    rebuilt = tmp_path / "rebuilt.csv"
    reaggregate(paths["metrics"], rebuilt)
    assert rebuilt.read_bytes() == (tmp_path / "run" / "aggregate.csv").read_bytes()


def test_reaggregate_quantile_oracle(tmp_path):
    # hand-written metrics: one cell, foo = 1..8, so mean 4.5 and the
    # interpolated 2.5% / 97.5% quantiles are 1.175 and 7.825
    src = tmp_path / "metrics.csv"
    lines = ["# schema=1", "d,k,n,replicate,foo"]
    lines += [f"2,1,10,{i},{float(v)!r}" for i, v in enumerate(range(1, 9))]
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "agg.csv"
    reaggregate(src, out)
    _, rows = read_csv(out)
    assert len(rows) == 1
    row = rows[0]
    assert row["metric"] == "foo"
    assert row["mean"] == pytest.approx(4.5, rel=1e-12)
    assert row["q025"] == pytest.approx(1.175, rel=1e-12)
    assert row["q975"] == pytest.approx(7.825, rel=1e-12)
    bad = tmp_path / "noreps.csv"
    bad.write_text("d,k\n1,2\n")
    with pytest.raises(ValueError):
        reaggregate(bad, out)


def test_runner_mode_mismatch():
    sparse_config = ExperimentConfig(mode="sparse", output_dir="o",
                                     p_values=(10,), k_values=(1,),
                                     n_values=(50,))
    with pytest.raises(ConfigError):
        run_matrix_experiment(sparse_config)
