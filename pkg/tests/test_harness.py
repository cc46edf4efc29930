import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soul.harness.cli import main
from soul.harness.config import ConfigError, MissingKeyError, load_config, normalize, parse, serialize
from soul.harness.data import DatasetError, load_csv_dataset, load_wisconsin, standardize, train_test_split
from soul.harness.experiments import build_experiment, schedule_warnings, support_count
from soul.harness.generators import gen_audio_problem, gen_random_effects_problem, note_dictionary
from soul.schedules import ScheduleSet

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))
MINIMAL = "experiment = toy_gaussian\ndelta0 = 0.5\na = 0.8\ngamma0 = 0.05\nn_iterations = 200\n"


class TestConfig:
    def test_configs_shipped(self):
        assert {p.stem for p in CONFIGS} == {"audio", "blr", "random_effects", "toy_gaussian"}

    @pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
    def test_round_trip(self, path):
        text = path.read_text()
        assert serialize(parse(text, base_dir=path.parent)) == normalize(text)

    def test_normalize_canonical(self):
        text = "  a=0.80  # exponent\n\nexperiment=blr\ndelta0 = 6e1\ngamma0=1e-5\nn_iterations = 1e3\n"
        assert normalize(text) == "experiment = blr\ndelta0 = 60.0\na = 0.8\ngamma0 = 1e-05\nn_iterations = 1000\n"

    def test_missing_key_named(self):
        with pytest.raises(MissingKeyError) as info:
            parse(MINIMAL.replace("a = 0.8\n", ""))
        assert info.value.key == "a"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            parse(MINIMAL + "colour = red\n")
        assert info.value.key == "colour"

    @pytest.mark.parametrize("line,key", [("delta0 = -1", "delta0"), ("n_iterations = 2.5", "n_iterations"),
                                          ("log_theta = maybe", "log_theta"), ("experiment = svm", "experiment"),
                                          ("data_in = /no/such/file.csv", "data_in")])
    def test_bad_values(self, line, key):
        with pytest.raises(ConfigError) as info:
            parse(MINIMAL + line + "\n")
        assert info.value.key == key

    def test_defaults_not_serialized(self):
        cfg = parse(MINIMAL)
        assert cfg.chain_burnin == 0 and cfg.sigma2 == 5.0
        assert serialize(cfg) == normalize(MINIMAL)

    @given(st.floats(1e-6, 1e6), st.floats(0, 1), st.integers(1, 10**7))
    def test_round_trip_property(self, delta0, a, n):
        text = f"experiment = toy_gaussian\ndelta0 = {delta0!r}\na = {a!r}\ngamma0 = 0.1\nn_iterations = {n}\n"
        assert serialize(parse(text)) == normalize(text)
        assert parse(serialize(parse(text))).values == parse(text).values


class TestData:
    def test_wisconsin_dimensions(self):
        data = load_wisconsin()
        assert (data.n_obs, data.dim) == (683, 10)
        np.testing.assert_array_equal(data.covariates[:, -1], 1.0)
        np.testing.assert_allclose(data.covariates[:, :-1].mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(data.covariates[:, :-1].std(axis=0), 1.0, rtol=1e-12)

    def test_two_rows(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("f1,f2,label\n1,10,0\n3,-2,1\n")
        data = load_csv_dataset(path)
        np.testing.assert_allclose(data.covariates, [[-1, 1, 1], [1, -1, 1]])
        np.testing.assert_array_equal(data.labels, [0, 1])

    def test_missing_rows_dropped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2,0\n?,3,1\n2,,0\n4,1,1\n")
        assert load_csv_dataset(path).n_obs == 2

    def test_non_binary_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,0\n3,4,2\n")
        with pytest.raises(DatasetError):
            load_csv_dataset(path)

    def test_unparseable_row_has_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,y\n1,2,0\n3,x,1\n")
        with pytest.raises(DatasetError, match=":3:"):
            load_csv_dataset(path)

    def test_constant_column_warns(self, caplog):
        out = standardize(np.array([[1.0, 5.0], [3.0, 5.0]]))
        np.testing.assert_allclose(out, [[-1, 0], [1, 0]])
        assert "constant" in caplog.text

    def test_split(self):
        data = load_wisconsin()
        train, test = train_test_split(data, 0.8, seed=3)
        assert train.n_obs + test.n_obs == 683 and train.n_obs == 546
        again, _ = train_test_split(data, 0.8, seed=3)
        np.testing.assert_array_equal(train.covariates, again.covariates)


class TestGenerators:
    def test_audio_desk_defaults(self):
        prob = gen_audio_problem(0)
        assert (prob.ell, prob.dim, prob.n_samples) == (4000, 200, 120)
        assert np.count_nonzero(prob.x_true) == 8
        assert np.all((prob.x_true[prob.x_true != 0] >= 0.5) & (prob.x_true[prob.x_true != 0] <= 1.5))
        np.testing.assert_allclose(prob.truth, prob.synthesize(prob.x_true))

    def test_dictionary_unit_columns(self):
        psi = note_dictionary(400, 5, 4)
        np.testing.assert_allclose(np.sqrt(psi.multiply(psi).sum(axis=0)).A.ravel(), 1.0)
        assert psi.shape == (400, 20)

    def test_paper_scale_dimensions(self):
        psi = note_dictionary(319725, 100, 29)
        assert psi.shape == (319725, 2900)

    def test_pure_noise(self):
        prob = gen_audio_problem(1, sparsity=0)
        assert not prob.x_true.any()
        assert np.std(prob.observation) == pytest.approx(0.015, rel=0.3)

    def test_infeasible(self):
        with pytest.raises(ValueError):
            gen_audio_problem(0, ell=100, d_notes=20, d_positions=10)
        with pytest.raises(ValueError):
            gen_audio_problem(0, p=4000)

    def test_random_effects(self):
        prob, beta, x = gen_random_effects_problem(0)
        assert prob.covariates.shape == (500, 1000) and prob.loadings.shape == (500, 5)
        assert np.count_nonzero(beta) == 20
        assert np.all((beta[beta != 0] >= 1) & (beta[beta != 0] <= 5))
        assert x.shape == (5,)

    def test_single_active(self):
        _, beta, _ = gen_random_effects_problem(0, d_y=20, p=50, zero_frac=1 - 1 / 50)
        assert np.count_nonzero(beta) == 1

    def test_no_random_effect(self):
        prob_a, _, _ = gen_random_effects_problem(4, d_y=50, p=10, sigma_true=0.0)
        prob_b, _, _ = gen_random_effects_problem(4, d_y=50, p=10, sigma_true=0.0)
        np.testing.assert_array_equal(prob_a.labels, prob_b.labels)

    def test_deterministic(self):
        a, b = gen_audio_problem(7), gen_audio_problem(7)
        np.testing.assert_array_equal(a.observation, b.observation)
        np.testing.assert_array_equal(a.sample_idx, b.sample_idx)


class TestExperiments:
    def test_support_count(self):
        assert support_count(np.zeros(5)) == 0
        assert support_count([0.004, 0.006], 0.005) == 1
        assert support_count([0.005], 0.005) == 0
        with pytest.raises(ValueError):
            support_count([1.0], 0.0)

    def test_schedule_warnings(self):
        assert schedule_warnings(ScheduleSet(1, 0.9, 1, b=0.3)) == []
        assert "5/6" in schedule_warnings(ScheduleSet(60, 0.8, 1e-4))[0]
        assert schedule_warnings(ScheduleSet(1, 0.8, 1, b=0.5, c=0.8)) == []

    @pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
    def test_builds(self, path):
        exp = build_experiment(load_config(path))
        assert exp.model.domain.contains(exp.theta0)
        assert exp.x0.shape == (exp.model.dim_x,)

    def test_audio_starts_at_theta_cs(self):
        cfg = load_config(next(p for p in CONFIGS if p.stem == "audio"))
        exp = build_experiment(cfg)
        assert math.exp(exp.theta0[0]) == pytest.approx(exp.extras["theta_cs"])


class TestCli:
    def write(self, tmp_path, text):
        path = tmp_path / "exp.cfg"
        path.write_text(text + f"out_dir = {tmp_path / 'out'}\n")
        return path

    def test_check_schedule_fixed(self, capsys):
        assert main(["check-schedule", "--a", "0.9", "--b", "0.3", "--fixed-batch"]) == 0
        assert capsys.readouterr().out.strip() == "valid, b∈(0.2,0.4)"

    def test_check_schedule_invalid(self, capsys):
        assert main(["check-schedule", "--a", "1", "--b", "1", "--c", "2"]) == 1
        assert "a<1" in capsys.readouterr().out

    def test_run_toy(self, tmp_path, capsys):
        cfg = self.write(tmp_path, MINIMAL.replace("n_iterations = 200", "n_iterations = 20000")
                         + "theta_warmup = 1000\ny = 1.0\n")
        assert main(["run", str(cfg)]) == 0
        out = capsys.readouterr()
        line = out.out.strip().splitlines()[-1]
        assert line.startswith("theta_hat=") and " wall_time_s=" in line
        assert abs(float(line.split()[0].split("=")[1]) - 1.0) < 0.05
        assert "5/6" in out.err  # a = 0.8 under a fixed batch draws a warning
        assert (tmp_path / "out" / "trace.csv").exists()

    def test_missing_key_exit_code(self, tmp_path, capsys):
        cfg = self.write(tmp_path, MINIMAL.replace("gamma0 = 0.05\n", ""))
        assert main(["run", str(cfg)]) == 2
        assert "gamma0" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["check-schedule", "--a", "0.9", "--b", "0.3", "--bogus"]) == 2
        assert main([]) == 2

    def test_byte_identical_outputs(self, tmp_path):
        cfg = self.write(tmp_path, MINIMAL)
        assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
        assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()

    def test_replicate(self, tmp_path, capsys):
        cfg = self.write(tmp_path, MINIMAL)
        assert main(["replicate", str(cfg), "--n", "3", "--workers", "1", "--bins", "4"]) == 0
        rows = (tmp_path / "out" / "replicates.csv").read_text().splitlines()
        assert rows[0] == "replicate,theta_hat_0" and len(rows) == 4
        hist = (tmp_path / "out" / "histogram.csv").read_text().splitlines()
        assert hist[0] == "bin_lo,bin_hi,count"
        assert sum(int(r.split(",")[2]) for r in hist[1:]) == 3

    def test_thme_scan(self, tmp_path, capsys):
        cfg = self.write(tmp_path, MINIMAL + "y = 1.0\nscan_min = -1\nscan_max = 3\nscan_points = 5\n"
                         "scan_samples = 5000\nscan_gamma = 0.05\nscan_burnin = 200\nscan_thin = 2\n"
                         "scan_chains = 50\n")
        assert main(["thme-scan", str(cfg)]) == 0
        star = float(capsys.readouterr().out.split()[0].split("=")[1])
        assert abs(star - 1.0) < 0.2
        assert (tmp_path / "out" / "thme_scan.csv").read_text().startswith("theta,log_phat,n_inside,radius\n")

    def test_thme_scan_needs_grid(self, tmp_path, capsys):
        assert main(["thme-scan", str(self.write(tmp_path, MINIMAL))]) == 2
        assert "scan_min" in capsys.readouterr().err

    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--points", "5"]) == 0
        assert capsys.readouterr().out.count("PASS") == 7

    def test_drift_check(self, tmp_path, capsys):
        assert main(["drift-check", "--gamma", "0.1", "--n-mc", "5000", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "drift_gamma_0.1.csv").exists()

    def test_gen_data_deterministic(self, tmp_path):
        text = ("experiment = random_effects\ndelta0 = 0.2\na = 0.95\ngamma0 = 0.01\nn_iterations = 10\n"
                "d_y = 40\np_fixed = 30\nzero_frac = 0.9\n")
        cfg = self.write(tmp_path, text)
        assert main(["gen-data", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
        assert main(["gen-data", str(cfg), "--out-dir", str(tmp_path / "b")]) == 0
        for name in ("covariates.csv", "loadings.csv", "labels.csv", "beta_true.csv", "x_true.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_gen_data_rejects_toy(self, tmp_path):
        assert main(["gen-data", str(self.write(tmp_path, MINIMAL))]) == 2

    def test_map_sweep(self, tmp_path, capsys):
        text = ("experiment = audio\ndelta0 = 0.01\na = 0.8\ngamma0 = 1e-5\nn_iterations = 10\nell = 400\n"
                "d_notes = 5\nd_positions = 4\np = 40\nsparsity = 3\nsweep_points = 4\n")
        assert main(["map-sweep", str(self.write(tmp_path, text)), "--workers", "1"]) == 0
        rows = (tmp_path / "out" / "map_sweep.csv").read_text().splitlines()
        assert rows[0] == "theta,mse" and len(rows) == 5
