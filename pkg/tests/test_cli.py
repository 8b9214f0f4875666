import os
import re

import pytest

from recbench.cli import load_config, main, parse_args
from recbench.errors import ConfigError


class TestParseArgs:
    def test_run(self):
        args = parse_args(["run", "--config", "exp.cfg"])
        assert args.command == "run"
        assert args.config == "exp.cfg"

    def test_synth(self):
        args = parse_args([
            "synth", "--mode", "diversity", "--clusters", "5",
            "--docs-per-cluster", "40", "--items-per-cluster", "10",
            "--items-per-doc", "4", "--seed", "7", "--out", "data/",
        ])
        assert args.command == "synth"
        assert args.mode == "diversity"
        assert args.clusters == 5
        assert args.items_per_doc == 4

    def test_gradcheck_default_seed(self):
        assert parse_args(["gradcheck"]).seed == 0

    def test_unknown_flag_exits_two(self, capsys):
        assert main(["--bogus"]) == 2
        assert main(["run", "--bogus"]) == 2
        capsys.readouterr()

    def test_no_command_exits_two(self, capsys):
        assert main([]) == 2
        capsys.readouterr()


class TestLoadConfig:
    def write(self, tmp_path, text):
        path = tmp_path / "exp.cfg"
        path.write_text(text)
        return path

    def test_minimal_defaults(self, tmp_path):
        path = self.write(tmp_path,
                          "ratings = r.tsv\nmeta = m.tsv\nsplit_year = 2011\nout = res.csv\n")
        config = load_config(path)
        assert config.n_runs == 3
        assert config.epochs == 20
        assert config.modality == "both"
        assert config.alphas == (1,)
        assert config.models == ("cooc", "svd", "mlp", "ae", "aae")
        assert config.embeddings == "builtin:hash:50:0"
        assert config.base_seed == 0

    def test_alpha_sweep(self, tmp_path):
        path = self.write(tmp_path,
                          "ratings = r\nmeta = m\nsplit_year = 2011\nout = o\n"
                          "alphas = 15,20,25\n")
        assert load_config(path).alphas == (15, 20, 25)

    def test_unknown_model_lists_valid_names(self, tmp_path):
        path = self.write(tmp_path,
                          "ratings = r\nmeta = m\nsplit_year = 2011\nout = o\n"
                          "models = gcn\n")
        with pytest.raises(ConfigError, match="cooc, svd, mlp, ae, aae"):
            load_config(path)

    def test_unknown_key_names_line(self, tmp_path):
        path = self.write(tmp_path, "ratings = r\nwat = 1\n")
        with pytest.raises(ConfigError, match=r":2: unknown key 'wat'"):
            load_config(path)

    def test_bad_int_names_key_and_line(self, tmp_path):
        path = self.write(tmp_path,
                          "ratings = r\nmeta = m\nsplit_year = soon\nout = o\n")
        with pytest.raises(ConfigError, match=r":3:.*split_year"):
            load_config(path)

    def test_missing_required_key(self, tmp_path):
        path = self.write(tmp_path, "ratings = r\nmeta = m\nout = o\n")
        with pytest.raises(ConfigError, match="split_year"):
            load_config(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = self.write(tmp_path,
                          "# experiment\n\nratings = r\nmeta = m\n"
                          "split_year = 2011\nout = o\n")
        assert load_config(path).ratings == "r"

    def test_duplicate_key_rejected(self, tmp_path):
        path = self.write(tmp_path, "ratings = a\nratings = b\n")
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(path)


class TestMain:
    def test_version(self, capsys):
        assert main(["version"]) == 0
        out = capsys.readouterr().out.strip()
        assert re.fullmatch(r"\d+\.\d+\.\d+", out)

    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        match = re.search(r"max relative error: ([0-9.e-]+)", out)
        assert match and float(match.group(1)) < 1e-4

    def test_synth_writes_files(self, tmp_path, capsys):
        out_dir = tmp_path / "data"
        code = main(["synth", "--mode", "relatedness", "--clusters", "3",
                     "--docs-per-cluster", "10", "--items-per-cluster", "6",
                     "--items-per-doc", "2", "--seed", "7", "--out", str(out_dir)])
        assert code == 0
        assert (out_dir / "ratings.tsv").exists()
        assert (out_dir / "meta.tsv").exists()
        capsys.readouterr()

    def test_synth_infeasible_exits_one(self, tmp_path, capsys):
        code = main(["synth", "--mode", "relatedness", "--clusters", "3",
                     "--docs-per-cluster", "10", "--items-per-cluster", "2",
                     "--items-per-doc", "5", "--seed", "7", "--out", str(tmp_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def run_pipeline(self, tmp_path, capsys, seed="7"):
        data = tmp_path / "data"
        assert main(["synth", "--mode", "relatedness", "--clusters", "3",
                     "--docs-per-cluster", "20", "--items-per-cluster", "6",
                     "--items-per-doc", "2", "--seed", seed, "--out", str(data)]) == 0
        out_csv = tmp_path / "results.csv"
        config = tmp_path / "exp.cfg"
        config.write_text(
            f"ratings = {data / 'ratings.tsv'}\n"
            f"meta = {data / 'meta.tsv'}\n"
            "split_year = 2010\n"
            "alphas = 1\n"
            "models = cooc,svd,mlp\n"
            "modality = both\n"
            "runs = 2\n"
            "epochs = 3\n"
            f"out = {out_csv}\n")
        assert main(["run", "--config", str(config)]) == 0
        capsys.readouterr()
        return out_csv.read_text()

    def test_run_writes_csv_with_header(self, tmp_path, capsys):
        text = self.run_pipeline(tmp_path, capsys)
        lines = text.splitlines()
        assert lines[0] == "model,modality,alpha,run,seed,mrr,wall_time_s"
        assert len(lines) == 1 + 3 * 2  # models x runs

    def test_run_twice_identical_modulo_wall_time(self, tmp_path, capsys):
        first = self.run_pipeline(tmp_path / "a", capsys)
        second = self.run_pipeline(tmp_path / "b", capsys)

        def strip_wall(text):
            return [line.rsplit(",", 1)[0] for line in text.splitlines()]

        assert strip_wall(first) == strip_wall(second)

    def test_missing_ratings_exits_one_names_path(self, tmp_path, capsys):
        config = tmp_path / "exp.cfg"
        config.write_text("ratings = nowhere.tsv\nmeta = nowhere.tsv\n"
                          "split_year = 2010\nout = res.csv\n")
        assert main(["run", "--config", str(config)]) == 1
        assert "nowhere.tsv" in capsys.readouterr().err

    def test_failed_run_leaves_no_output(self, tmp_path, capsys):
        out_csv = tmp_path / "res.csv"
        config = tmp_path / "exp.cfg"
        config.write_text(f"ratings = nowhere.tsv\nmeta = nowhere.tsv\n"
                          f"split_year = 2010\nout = {out_csv}\n")
        assert main(["run", "--config", str(config)]) == 1
        capsys.readouterr()
        assert not out_csv.exists()
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []
