import numpy as np
import pytest

from homctl_figures import (FigureSpec, RenderError, render_certificate,
                            render_comparison, render_control,
                            render_trajectory)
from homctl_figures.cli import main as figures_main


def write_trajectory_csv(path, samples=40, m=1, chatter=False):
    rng = np.random.default_rng(0)
    t = np.arange(samples) * 0.05
    lines = ["t,x1,x2,x3," + ",".join(f"u{i+1}" for i in range(m)) + ",hom_norm"]
    for k in range(samples):
        decay = np.exp(-t[k])
        x = decay * np.array([1.0, -1.0, 0.5])
        u = (rng.choice([-1.0, 1.0]) if chatter else -decay) * np.ones(m)
        row = [t[k], *x, *u, decay]
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_certificate_csv(path, values):
    lines = ["delta,lambda_min"]
    deltas = np.geomspace(1e-6, 1.0, len(values))
    for d, v in zip(deltas, values):
        lines.append(f"{repr(float(d))},{repr(float(v))}")
    path.write_text("\n".join(lines) + "\n")
    return path


class TestTrajectory:
    def test_single_input(self, tmp_path):
        csv = write_trajectory_csv(tmp_path / "traj.csv")
        out = tmp_path / "traj.png"
        spec = FigureSpec(inputs=(csv,), kind="trajectory", output=str(out))
        assert render_trajectory(spec) == str(out)
        assert out.stat().st_size > 0
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_two_inputs_one_image(self, tmp_path):
        a = write_trajectory_csv(tmp_path / "a.csv", chatter=True)
        b = write_trajectory_csv(tmp_path / "b.csv")
        out = tmp_path / "two.png"
        spec = FigureSpec(inputs=(a, b), kind="trajectory", output=str(out),
                          panel_titles=("explicit", "consistent"))
        render_trajectory(spec)
        assert out.exists()

    def test_missing_state_column_named(self, tmp_path):
        csv = tmp_path / "bad.csv"
        csv.write_text("t,u1,hom_norm\n0.0,0.0,0.0\n0.05,0.0,0.0\n")
        spec = FigureSpec(inputs=(csv,), kind="trajectory",
                          output=str(tmp_path / "bad.png"))
        with pytest.raises(RenderError, match="'x1'"):
            render_trajectory(spec)

    def test_empty_csv_rejected(self, tmp_path):
        csv = tmp_path / "empty.csv"
        csv.write_text("t,x1,u1,hom_norm\n")
        spec = FigureSpec(inputs=(csv,), kind="trajectory",
                          output=str(tmp_path / "empty.png"))
        with pytest.raises(RenderError, match="no data"):
            render_trajectory(spec)

    def test_deterministic_output(self, tmp_path):
        csv = write_trajectory_csv(tmp_path / "traj.csv")
        outs = []
        for name in ("p1.png", "p2.png"):
            out = tmp_path / name
            render_trajectory(FigureSpec(inputs=(csv,), kind="trajectory",
                                         output=str(out)))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestControl:
    def test_control_only(self, tmp_path):
        csv = write_trajectory_csv(tmp_path / "traj.csv", m=2)
        out = tmp_path / "u.png"
        render_control(FigureSpec(inputs=(csv,), kind="control",
                                  output=str(out)))
        assert out.exists()


class TestCertificate:
    def test_positive_curve(self, tmp_path):
        csv = write_certificate_csv(tmp_path / "cert.csv",
                                    np.linspace(1e-7, 0.3, 50))
        out = tmp_path / "cert.png"
        render_certificate(FigureSpec(inputs=(csv,), kind="certificate",
                                      output=str(out)))
        assert out.exists()

    def test_single_point_marker(self, tmp_path):
        csv = write_certificate_csv(tmp_path / "one.csv", [0.2])
        out = tmp_path / "one.png"
        render_certificate(FigureSpec(inputs=(csv,), kind="certificate",
                                      output=str(out)))
        assert out.exists()

    def test_fail_verdict_renders(self, tmp_path):
        csv = write_certificate_csv(tmp_path / "fail.csv",
                                    np.linspace(-0.05, 0.3, 20))
        out = tmp_path / "fail.png"
        render_certificate(FigureSpec(inputs=(csv,), kind="certificate",
                                      output=str(out)))
        assert out.exists()

    def test_missing_column_named(self, tmp_path):
        csv = tmp_path / "bad.csv"
        csv.write_text("delta,value\n0.1,0.2\n")
        with pytest.raises(RenderError, match="'lambda_min'"):
            render_certificate(FigureSpec(inputs=(csv,), kind="certificate",
                                          output=str(tmp_path / "bad.png")))


class TestComparison:
    def test_requires_two_inputs(self, tmp_path):
        csv = write_trajectory_csv(tmp_path / "a.csv")
        with pytest.raises(RenderError, match="two input"):
            render_comparison(FigureSpec(inputs=(csv,), kind="comparison",
                                         output=str(tmp_path / "c.png")))

    def test_two_panel_output(self, tmp_path):
        a = write_trajectory_csv(tmp_path / "a.csv", chatter=True)
        b = write_trajectory_csv(tmp_path / "b.csv")
        out = tmp_path / "cmp.png"
        render_comparison(FigureSpec(inputs=(a, b), kind="comparison",
                                     output=str(out)))
        assert out.exists()


class TestSpec:
    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(RenderError, match="kind"):
            FigureSpec(inputs=("x.csv",), kind="sparkline", output="y.png")


class TestCli:
    def test_trajectory_command(self, tmp_path):
        csv = write_trajectory_csv(tmp_path / "traj.csv")
        out = tmp_path / "traj.png"
        assert figures_main(["trajectory", "--in", str(csv),
                             "--out", str(out)]) == 0
        assert out.exists()

    def test_error_exit_code(self, tmp_path):
        out = tmp_path / "missing.png"
        assert figures_main(["certificate", "--in", str(tmp_path / "no.csv"),
                             "--out", str(out)]) == 2
