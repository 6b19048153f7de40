"""
File writers for run outputs: CSV tables, fit summaries, plot scripts and
the optional PDF report.

Every text file starts with a `# ` header carrying the artifact version, the
command and the full resolved configuration. Nothing time-dependent goes into
the header, so identical runs give byte-identical files.
"""

from __future__ import annotations

import os
from typing import Iterable, List, Sequence, Tuple

import pandas as pd

from config.settings import APP_VERSION
from src.utils.logger import get_logger

log = get_logger(__name__)


# ───────────────────────────── HELPERS ─────────────────────────────

def build_header(command: str, config_text: str) -> list[str]:
    lines = [f"wgm-sim {APP_VERSION}", f"command: {command}", "resolved config:"]
    lines += [line for line in config_text.splitlines() if line.strip()]
    return lines


def _comment(lines: Iterable[str]) -> str:
    return "".join(f"# {line}\n" for line in lines)


def _target(output_dir: str, name: str) -> str:
    os.makedirs(output_dir, exist_ok=True)
    return os.path.join(output_dir, name)


# ───────────────────────────── TEXT OUTPUTS ─────────────────────────────

def write_csv(table: pd.DataFrame, output_dir: str, name: str, header: Sequence[str],
              columns: Sequence[str] | None = None) -> str:
    """
    Write `table` (restricted to `columns`, in that order) below the header.

    Boolean columns are written as true/false, NaN as an empty field.
    """
    frame = table if columns is None else table.loc[:, list(columns)]
    frame = frame.copy()
    for column in frame.columns:
        if frame[column].dtype == bool:
            frame[column] = frame[column].map({True: "true", False: "false"})
    path = _target(output_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(_comment(header))
        frame.to_csv(fh, index=False, lineterminator="\n")
    log.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_text(output_dir: str, name: str, lines: Sequence[str], header: Sequence[str]) -> str:
    path = _target(output_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(_comment(header))
        fh.write("".join(f"{line}\n" for line in lines))
    log.info("wrote %s", path)
    return path


def write_script(output_dir: str, name: str, text: str) -> str:
    path = _target(output_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


# ───────────────────────────── PDF REPORT ─────────────────────────────

def export_report_pdf(figures: List[Tuple[str, object, str]], output_path: str = "report.pdf",
                      title: str = "WGM cavity QED report"):
    """
    Export a PDF with one chart per page.

    Parameters
    ----------
    figures : List of (title, matplotlib figure, note) tuples.
    output_path : Path to save the PDF file.
    """
    import tempfile

    import matplotlib.pyplot as plt
    from fpdf import FPDF

    font_name = "Helvetica"

    with tempfile.TemporaryDirectory() as tmpdir:
        image_paths = []
        for idx, (panel_title, fig, note) in enumerate(figures):
            img_path = os.path.join(tmpdir, f"chart_{idx}.png")
            if not hasattr(fig, "savefig"):
                raise ValueError(f"Unsupported figure type: {type(fig)}")
            fig.savefig(img_path, bbox_inches="tight", dpi=200)
            plt.close(fig)
            image_paths.append((panel_title, img_path, note))

        pdf = FPDF()
        pdf.set_auto_page_break(auto=True, margin=15)
        pdf.add_page()
        pdf.set_font(font_name, "", 18)
        pdf.cell(0, 10, title, ln=True, align="C")
        pdf.ln(10)

        for panel_title, img_path, note in image_paths:
            pdf.add_page()
            pdf.set_font(font_name, "", 14)
            pdf.cell(0, 10, _latin1(panel_title), ln=True)
            pdf.ln(2)
            pdf.image(img_path, w=180)
            pdf.ln(8)
            if note:
                pdf.set_font(font_name, "", 11)
                pdf.multi_cell(0, 8, _latin1(note))
                pdf.ln(2)

        pdf.output(output_path)
    log.info("PDF report saved to %s", output_path)
    return output_path


def _latin1(text: str) -> str:
    # core PDF fonts are latin-1 only
    return text.encode("latin-1", "replace").decode("latin-1")
