import pytest

from hyperlab.core import config
from hyperlab.schemas import Command, RunConfig
from hyperlab.services import pipeline
from hyperlab.services.report_export import generate_pdf_bytes


def test_pdf_summary_bytes():
    pytest.importorskip("reportlab")
    payload = {
        "experiment": "numvar",
        "config_hash": "0123abcd",
        "base_seed": 3,
        "samples_per_cell": 100,
        "wall_clock": 1.5,
        "cells": [{"N": 64, "variance": 2.5, "z": [0.3, 0.0]}],
        "fits": {"variance_exponent": {"slope": 0.5, "slope_ci": [0.4, 0.6], "points": 3}},
        "warnings": ["small sample"],
    }
    pdf = generate_pdf_bytes(payload)
    assert pdf is not None
    assert pdf.startswith(b"%PDF")


def test_pdf_written_when_enabled(out_dir, monkeypatch):
    pytest.importorskip("reportlab")
    monkeypatch.setattr(config, "ENABLE_PDF_REPORT", True)
    outcome = pipeline.run(RunConfig(command=Command.MDE, out=str(out_dir)))
    assert (outcome.out_dir / "report.pdf").exists()
