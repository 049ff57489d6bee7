import matplotlib.pyplot as plt
import pytest

from plotkit import FigureSpec, SchemaError, render
from plotkit.cli import main

ZZ_CSV = """\
# buschain 0.1.0
# [device]
bus_freq_ghz,g_mhz,zeta_mhz,ambiguous
5.3,130.0,-0.08,0
5.9,130.0,0.001,0
6.6,130.0,0.0005,0
5.3,150.0,-0.2,0
5.9,150.0,0.002,0
6.6,150.0,0.001,0
5.3,170.0,-0.41,0
5.9,170.0,0.0025,0
6.6,170.0,0.0013,0
5.3,190.0,-0.48,0
5.9,190.0,0.006,0
6.6,190.0,0.0032,0
"""

CZ_CSV = """\
# buschain 0.1.0
gate_time_ns,g_mhz,nu_op_ghz,cond_phase_rad,leakage,error,reason
60.0,150.0,5.257,3.1413,0.01,0.012,
80.0,150.0,5.258,3.1414,0.008,0.009,
40.0,170.0,,,,,infeasible: max phase 2.1 rad
60.0,170.0,5.2601,3.1412,0.009,0.011,
80.0,170.0,5.2589,3.1408,0.0065,0.0065,
"""

Q_CSV = """\
# buschain 0.1.0
quality_factor,error,unitary_baseline
1000.0,0.043,0.0065
5000.0,0.0139,0.0065
10000.0,0.0102,0.0065
100000.0,0.00688,0.0065
1000000.0,0.00654,0.0065
inf,0.0065,0.0065
"""


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestZZFigure:
    def test_renders_four_labelled_curves(self, tmp_path):
        csv = write(tmp_path, "zz.csv", ZZ_CSV)
        out = tmp_path / "zz.png"
        fig = render(FigureSpec(str(csv), "zz", str(out)))
        assert out.exists() and out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        ax = fig.axes[0]
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert labels == ["130 MHz", "150 MHz", "170 MHz", "190 MHz"]
        assert ax.get_yscale() == "symlog"

    def test_input_file_untouched(self, tmp_path):
        csv = write(tmp_path, "zz.csv", ZZ_CSV)
        before = csv.read_bytes()
        render(FigureSpec(str(csv), "zz", str(tmp_path / "zz.png")))
        assert csv.read_bytes() == before

    def test_deterministic_dimensions(self, tmp_path):
        csv = write(tmp_path, "zz.csv", ZZ_CSV)
        fig1 = render(FigureSpec(str(csv), "zz", str(tmp_path / "a.png")))
        xlim1, size1 = fig1.axes[0].get_xlim(), tuple(fig1.get_size_inches())
        fig2 = render(FigureSpec(str(csv), "zz", str(tmp_path / "b.png")))
        assert fig2.axes[0].get_xlim() == xlim1
        assert tuple(fig2.get_size_inches()) == size1


class TestCZScanFigure:
    def test_renders_and_skips_infeasible_rows(self, tmp_path):
        csv = write(tmp_path, "cz.csv", CZ_CSV)
        out = tmp_path / "cz.png"
        fig = render(FigureSpec(str(csv), "czscan", str(out)))
        assert out.exists()
        ax = fig.axes[0]
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert labels == ["150 MHz", "170 MHz"]
        curve_170 = ax.get_lines()[1]
        assert len(curve_170.get_xdata()) == 2  # the infeasible 40 ns row is dropped
        assert ax.get_yscale() == "log"


class TestQScanFigure:
    def test_dashed_baseline_at_lossless_value(self, tmp_path):
        csv = write(tmp_path, "q.csv", Q_CSV)
        out = tmp_path / "q.png"
        fig = render(FigureSpec(str(csv), "qscan", str(out)))
        ax = fig.axes[0]
        assert ax.get_xscale() == "log" and ax.get_yscale() == "log"
        dashed = [ln for ln in ax.get_lines() if ln.get_linestyle() == "--"]
        assert dashed and dashed[0].get_ydata()[0] == pytest.approx(0.0065)


class TestSchemaValidation:
    def test_header_mismatch_names_columns(self, tmp_path):
        csv = write(tmp_path, "bad.csv", "a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError) as err:
            render(FigureSpec(str(csv), "zz", str(tmp_path / "x.png")))
        assert "bus_freq_ghz,g_mhz,zeta_mhz,ambiguous" in str(err.value)
        assert "a,b,c" in str(err.value)

    def test_kind_header_cross_rejected(self, tmp_path):
        csv = write(tmp_path, "q.csv", Q_CSV)
        with pytest.raises(SchemaError):
            render(FigureSpec(str(csv), "zz", str(tmp_path / "x.png")))

    def test_empty_data_rows_rejected(self, tmp_path):
        csv = write(tmp_path, "empty.csv", "bus_freq_ghz,g_mhz,zeta_mhz,ambiguous\n")
        with pytest.raises(SchemaError):
            render(FigureSpec(str(csv), "zz", str(tmp_path / "x.png")))

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            FigureSpec("x.csv", "scatter", "y.png")


class TestCLI:
    def test_render_success_exit_zero(self, tmp_path):
        csv = write(tmp_path, "zz.csv", ZZ_CSV)
        out = tmp_path / "zz.png"
        assert main(["render", "--kind", "zz", "--in", str(csv), "--out", str(out)]) == 0
        assert out.exists()

    def test_schema_mismatch_exit_nonzero(self, tmp_path):
        csv = write(tmp_path, "zz.csv", ZZ_CSV)
        code = main(["render", "--kind", "qscan", "--in", str(csv),
                     "--out", str(tmp_path / "x.png")])
        assert code != 0

    def test_missing_file_exit_nonzero(self, tmp_path):
        code = main(["render", "--kind", "zz", "--in", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "x.png")])
        assert code != 0
