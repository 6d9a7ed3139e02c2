from traceplots.cli import main
from traceplots.render import render_convergence
from traceplots import aggregate


class TestPlotCommand:
    def test_writes_figure(self, trace_dir, tmp_path, capsys):
        out = tmp_path / "fig.png"
        code = main(["plot", "--inputs", f"zoba={trace_dir}/run_*.csv",
                     "--x", "evals", "--y", "norm_gap", "--out", str(out)])
        assert code == 0
        assert out.exists() and out.stat().st_size > 0
        assert "zoba (4 runs)" in capsys.readouterr().out

    def test_defaults(self, trace_dir, tmp_path):
        out = tmp_path / "fig.png"
        assert main(["plot", "--inputs", f"{trace_dir}/run_*.csv",
                     "--out", str(out)]) == 0
        assert out.exists()

    def test_multiple_groups(self, trace_dir, tmp_path):
        out = tmp_path / "fig.png"
        code = main(["plot",
                     "--inputs", f"a={trace_dir}/run_0*.csv",
                     "--inputs", f"b={trace_dir}/run_*.csv",
                     "--out", str(out)])
        assert code == 0

    def test_no_match_is_error(self, tmp_path, capsys):
        code = main(["plot", "--inputs", f"{tmp_path}/none_*.csv",
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_schema_error_names_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        code = main(["plot", "--inputs", str(bad),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        assert "bad.csv" in capsys.readouterr().err

    def test_linear_y_flag(self, trace_dir, tmp_path):
        assert main(["plot", "--inputs", f"{trace_dir}/run_*.csv",
                     "--linear-y", "--out", str(tmp_path / "lin.png")]) == 0


class TestRender:
    def test_render_returns_path(self, trace_dir, tmp_path):
        curves = aggregate([f"g={trace_dir}/run_*.csv"], "evals", "norm_gap")
        out = render_convergence(curves, "evals", "norm_gap",
                                 str(tmp_path / "r.png"))
        assert out.endswith("r.png")
