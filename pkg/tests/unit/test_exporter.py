import math
import os
import tempfile
import unittest

import pandas as pd

from src.report.exporter import build_header, export_report_pdf, write_csv, write_text
from src.report.plot_script import render_plot_script
from src.visualize.charts import PlotPanel, render_panel


def sample_table():
    return pd.DataFrame({
        "delta": [0.1, 0.2],
        "phi": [0.0, math.pi],
        "n_cw": [1e-3, math.nan],
        "converged": [True, False],
    })


class TestCsv(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_header_then_schema(self):
        header = build_header("sweep", "[params]\nphi = 0.0\n\n[run]\nworkers = auto\n")
        path = write_csv(sample_table(), self.tmp.name, "sweep.csv", header, ["delta", "n_cw", "converged"])
        with open(path) as fh:
            lines = fh.read().split("\n")
        self.assertTrue(lines[0].startswith("# wgm-sim "))
        self.assertEqual(lines[1], "# command: sweep")
        self.assertEqual(lines[2], "# resolved config:")
        self.assertIn("# phi = 0.0", lines)
        body = [line for line in lines if line and not line.startswith("#")]
        self.assertEqual(body[0], "delta,n_cw,converged")
        self.assertEqual(body[1], "0.1,0.001,true")
        self.assertEqual(body[2], "0.2,,false")

    def test_reads_back_with_pandas(self):
        path = write_csv(sample_table(), self.tmp.name, "t.csv", ["x"])
        table = pd.read_csv(path, comment="#")
        self.assertEqual(list(table.columns), ["delta", "phi", "n_cw", "converged"])
        self.assertEqual(list(table["converged"]), [True, False])

    def test_identical_runs_are_byte_identical(self):
        header = build_header("steady", "phi = 0.0")
        a = write_csv(sample_table(), self.tmp.name, "a.csv", header)
        b = write_csv(sample_table(), self.tmp.name, "b.csv", header)
        with open(a, "rb") as fa, open(b, "rb") as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_text(self):
        path = write_text(self.tmp.name, "fits.txt", ["I_c: A_dB=1"], ["wgm-sim"])
        with open(path) as fh:
            self.assertEqual(fh.read(), "# wgm-sim\nI_c: A_dB=1\n")


class TestPlots(unittest.TestCase):

    def panels(self):
        return [
            PlotPanel("line", "sweep.csv", "occupation", x="phi", ys=("n_cw",), scale_x=math.pi, log=True),
            PlotPanel("heatmap", "plane.csv", "plane", x="phi", y="delta", z="n_cw", where={"delta_f": 0.0}),
        ]

    def test_script_compiles(self):
        text = render_plot_script("plot_sweep", self.panels(), ["wgm-sim", "command: sweep"])
        compile(text, "plot_sweep.py", "exec")
        self.assertIn("plot_sweep_1.png", text)
        self.assertIn("plot_sweep_2.png", text)
        self.assertTrue(text.startswith("# wgm-sim\n"))

    def test_select(self):
        table = pd.DataFrame({"delta_f": [0.0, 0.5], "phi": [0.1, 0.2]})
        self.assertEqual(len(self.panels()[1].select(table)), 1)

    def test_pdf(self):
        table = pd.DataFrame({"phi": [0.0, 1.0, 2.0], "n_cw": [1e-3, 2e-3, 1.5e-3]})
        fig = render_panel(table, self.panels()[0])
        with tempfile.TemporaryDirectory() as tmp:
            path = export_report_pdf([("occupation", fig, "κ = 0.125")], os.path.join(tmp, "r.pdf"))
            with open(path, "rb") as fh:
                self.assertEqual(fh.read(4), b"%PDF")


if __name__ == "__main__":
    unittest.main()
