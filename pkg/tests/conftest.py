import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def cards():
    """Bundled test photos: list of (image array, annotation dict)."""
    from spoofsynth.pipeline import read_image

    out = []
    for line in (DATA / "cards.jsonl").read_text().splitlines():
        rec = json.loads(line)
        out.append((read_image(DATA / rec["image"]), rec))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_dataset(tmp_path, n_print, n_replay, n_live, image="card_a.png"):
    """A small dataset manifest in ``tmp_path`` reusing one bundled photo."""
    src = json.loads((DATA / "cards.jsonl").read_text().splitlines()[0])
    img_path = str((DATA / image).resolve())
    rows = []
    for label, n in (("print", n_print), ("replay", n_replay), ("live", n_live)):
        for k in range(n):
            rows.append({"id": f"{label}{k}", "image": img_path, "corners": src["corners"],
                         "eye_px_dist": src["eye_px_dist"], "label": label})
    path = tmp_path / "dataset.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path
