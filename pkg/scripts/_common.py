"""Shared helpers for the example scripts."""

from dataclasses import replace
from pathlib import Path
import warnings

from rombayes.config import load_config
from rombayes.pipeline import emit_report, run_pipeline

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def configure(name, output, **sections):
    """Load ``configs/<name>.yaml`` and override fields section by section."""
    cfg = load_config(CONFIGS / f"{name}.yaml")
    for section, fields in sections.items():
        cfg = replace(cfg, **{section: replace(getattr(cfg, section), **fields)})
    return replace(cfg, output_dir=str(output))


def run(cfg, quiet=True):
    with warnings.catch_warnings():
        if quiet:
            warnings.simplefilter("ignore")
        report = run_pipeline(cfg)
    emit_report(report, cfg.output_dir, cfg)
    return report
