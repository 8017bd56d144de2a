import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))


@pytest.fixture(scope="session")
def mini_induction(tmp_path_factory):
    """A short scripted-touch dataset plus one pipeline run over it."""
    from contacttrack.config import PipelineConfig
    from contacttrack.pipeline import run_pipeline
    from contacttrack.scenes import induction_lite
    from contacttrack.simulator import emit_dataset

    root = tmp_path_factory.mktemp("mini_induction")
    ds = str(root / "data")
    out = str(root / "run")
    emit_dataset(induction_lite(frame_count=160), ds, seed=0)
    summary = run_pipeline(
        f"{ds}/calibration.json", ds, out, PipelineConfig(static_map=True)
    )
    return {"ds": ds, "out": out, "summary": summary}
