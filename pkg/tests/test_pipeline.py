import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import write_dataset
from spoofsynth.composite import CompositeConfig, paste_layer
from spoofsynth.config import SynthConfig
from spoofsynth.errors import SampleError, SlotOutOfRange
from spoofsynth.mesher import RegionAnnotation
from spoofsynth.pipeline import (BEND_RANGE, PITCH_RANGE, ROTATE_AND_BEND, ROTATE_ONLY, YAW_RANGE,
                                 ManifestRecord, SynthesisParams, derive_seed, read_manifest,
                                 render_sample, run_batch, sample_params, synthesize_one)
from test_composite import quad_interior

ZERO = SynthesisParams(0.0, 0.0)


def seam_band(shape, quad, width=2.0):
    """Pixels whose centers lie within ``width`` of the quad outline."""
    return quad_interior(shape, quad, erode=-width) & ~quad_interior(shape, quad, erode=width)


# ---------------------------------------------------------------- params

def test_print_slots():
    params = [sample_params(np.random.default_rng(s), "print", s) for s in range(10)]
    assert sum(p.bend_deg is not None for p in params) == 5
    assert all(p.mode == ROTATE_AND_BEND for p in params[:5])
    assert all(p.mode == ROTATE_ONLY and p.bend_deg is None for p in params[5:])


def test_replay_slots():
    params = [sample_params(np.random.default_rng(s), "replay", s) for s in range(5)]
    assert all(p.bend_deg is None and p.mode == ROTATE_ONLY for p in params)
    with pytest.raises(SlotOutOfRange):
        sample_params(np.random.default_rng(0), "replay", 5)
    with pytest.raises(SlotOutOfRange):
        sample_params(np.random.default_rng(0), "print", 10)
    with pytest.raises(ValueError):
        sample_params(np.random.default_rng(0), "live", 0)


def test_fixed_draw_count():
    for label, slot in (("print", 0), ("print", 7), ("replay", 2)):
        rng = np.random.default_rng(42)
        sample_params(rng, label, slot)
        ref = np.random.default_rng(42)
        ref.random(5)
        assert rng.random() == ref.random()


def test_draws_uniform_and_in_range():
    rng = np.random.default_rng(2024)
    n = 100_000
    draws = [sample_params(rng, "print", 0) for _ in range(n)]
    yaw = np.array([p.yaw_deg for p in draws])
    pitch = np.array([p.pitch_deg for p in draws])
    bend = np.array([p.bend_deg for p in draws])
    for vals, (lo, hi) in ((yaw, YAW_RANGE), (pitch, PITCH_RANGE), (bend, BEND_RANGE)):
        assert vals.min() >= lo and vals.max() <= hi
        counts, _ = np.histogram(vals, bins=10, range=(lo, hi))
        assert np.all(np.abs(counts - n / 10) <= 0.05 * n / 10)
    assert all(p.in_sampling_ranges() for p in draws[:1000])


def test_mirror_and_random_axis():
    rng = np.random.default_rng(0)
    draws = [sample_params(rng, "print", 0, bend_axis="random", mirror_yaw=True) for _ in range(2000)]
    yaw = np.array([p.yaw_deg for p in draws])
    assert 0.4 < np.mean(yaw < 0) < 0.6 and yaw.min() >= -40
    axes = [p.bend_axis for p in draws]
    assert 0.4 < axes.count("horizontal") / len(axes) < 0.6


def test_derive_seed():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    seeds = {derive_seed(0, i, s) for i in range(50) for s in range(10)}
    assert len(seeds) == 500
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_params_validation_and_round_trip():
    with pytest.raises(ValueError):
        SynthesisParams(1, 2, 45.0, "vertical", ROTATE_ONLY)
    with pytest.raises(ValueError):
        SynthesisParams(1, 2, None, "vertical", ROTATE_AND_BEND)
    with pytest.raises(ValueError):
        SynthesisParams(1, 2, None, "diagonal")
    p = SynthesisParams(12.5, -3.0, 40.0, "horizontal", ROTATE_AND_BEND)
    assert SynthesisParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p
    assert not SynthesisParams(50, 0).in_sampling_ranges()


def test_manifest_record_fields():
    rec = ManifestRecord("a.png", "images/x.png", "synthetic_spoof", ZERO, 7, "a")
    d = rec.to_dict()
    assert list(d) == ["source_path", "output_path", "label", "params", "seed", "parent_id"]
    assert ManifestRecord.from_dict(d) == rec
    assert "origin" in replace(rec, origin="external").to_dict()


# ---------------------------------------------------------------- one sample

def test_identity_pipeline_on_cards(cards):
    for image, rec in cards:
        fused, record = synthesize_one(image, rec, ZERO)
        quad = np.array(rec["corners"], float)
        band = seam_band(image.shape[:2], quad)
        diff = np.abs(fused.astype(int) - image.astype(int)).max(axis=2)
        assert diff[~band].max() <= 2, rec["id"]
        assert record.parent_id == rec["id"] and record.label == "synthetic_spoof"


def test_same_params_give_identical_bytes(cards, tmp_path):
    from spoofsynth.pipeline import write_image

    image, rec = cards[1]
    p = SynthesisParams(30.0, 5.0, 45.0, "vertical", ROTATE_AND_BEND)
    digests = []
    for k in range(2):
        fused, _ = synthesize_one(image, rec, p)
        path = tmp_path / f"out{k}.png"
        write_image(fused, path)
        digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_degenerate_quad_error_names_sample(cards):
    image, rec = cards[0]
    bad = dict(rec, corners=[[10, 10], [10, 10], [50, 50], [10, 50]], id="broken-7")
    with pytest.raises(SampleError) as info:
        synthesize_one(image, bad, ZERO)
    assert info.value.sample_id == "broken-7"
    assert "broken-7" in str(info.value)


def test_live_sample_rejected(cards):
    image, rec = cards[0]
    with pytest.raises(SampleError):
        synthesize_one(image, dict(rec, label="live"), ZERO)


def test_cover_realign_hides_original_print(cards):
    # every sampled pose must leave no original print pixel showing
    rng = np.random.default_rng(77)
    for image, rec in cards:
        ann = RegionAnnotation.from_dict(rec)
        quad = np.array(rec["corners"], float)
        inner = quad_interior(image.shape[:2], quad, erode=1)
        for slot in range(10):
            p = sample_params(rng, "print", slot, bend_axis="random", mirror_yaw=True)
            r = render_sample(image, ann, p)
            cov, _ = paste_layer(image.shape[:2], r.layer)
            assert cov[inner].all(), (rec["id"], p)


def test_realign_modes_differ(cards):
    image, rec = cards[0]
    ann = RegionAnnotation.from_dict(rec)
    p = SynthesisParams(30.0, 0.0)
    outs = {m: render_sample(image, ann, p, SynthConfig(composite=CompositeConfig(realign=m))).image
            for m in ("cover", "corners", "off")}
    assert not np.array_equal(outs["cover"], outs["corners"])
    assert not np.array_equal(outs["cover"], outs["off"])


def test_weak_projection_and_horizontal_bend_run(cards):
    image, rec = cards[2]
    cfg = SynthConfig(projection="weak", perspective_correct=True, grid=(12, 12))
    p = SynthesisParams(20.0, -5.0, 50.0, "both", ROTATE_AND_BEND)
    fused, _ = synthesize_one(image, rec, p, cfg)
    assert fused.shape == image.shape and not np.array_equal(fused, image)


# ---------------------------------------------------------------- batches

def manifest_bytes(report):
    return Path(report.manifest_path).read_bytes()


def test_batch_counts(tmp_path):
    ds = write_dataset(tmp_path, 3, 2, 4)
    report = run_batch(ds, SynthConfig(grid=(12, 12)), seed=5, out_dir=tmp_path / "out")
    assert report.ok
    recs = read_manifest(report.manifest_path)
    synth = [r for r in recs if r.synthetic]
    assert len(synth) == 40
    assert len(recs) - len(synth) == 9
    assert all(r.params is not None and r.parent_id for r in synth)
    assert all(r.params is None and r.parent_id is None for r in recs if not r.synthetic)
    parents = {r.parent_id for r in synth}
    assert not any(p.startswith("live") for p in parents)
    bent = [r for r in synth if r.params.bend_deg is not None]
    assert len(bent) == 15 and all(r.parent_id.startswith("print") for r in bent)
    for r in synth:
        assert (tmp_path / "out" / r.output_path).is_file()


def test_batch_without_spoofs(tmp_path):
    ds = write_dataset(tmp_path, 0, 0, 3)
    report = run_batch(ds, None, out_dir=tmp_path / "out")
    assert report.ok and report.n_synthetic == 0 and len(report.records) == 3


def test_batch_jobs_invariance(tmp_path):
    ds = write_dataset(tmp_path, 2, 1, 1)
    cfg = SynthConfig(grid=(10, 10))
    a = run_batch(ds, cfg, seed=11, jobs=1, out_dir=tmp_path / "a")
    b = run_batch(ds, cfg, seed=11, jobs=8, out_dir=tmp_path / "b")
    assert manifest_bytes(a) == manifest_bytes(b)
    for rec in a.records:
        if rec.synthetic:
            assert (tmp_path / "a" / rec.output_path).read_bytes() == (tmp_path / "b" / rec.output_path).read_bytes()
    c = run_batch(ds, cfg, seed=12, jobs=1, out_dir=tmp_path / "c")
    assert manifest_bytes(a) != manifest_bytes(c)


def test_batch_skips_failing_records(tmp_path):
    ds = write_dataset(tmp_path, 2, 0, 0)
    rows = [json.loads(l) for l in ds.read_text().splitlines()]
    rows[0]["image"] = str(tmp_path / "missing.png")
    rows.append(dict(rows[1], id="degen", corners=[[0, 0], [0, 0], [5, 5], [0, 5]]))
    ds.write_text("".join(json.dumps(r) + "\n" for r in rows))
    report = run_batch(ds, SynthConfig(grid=(8, 8)), out_dir=tmp_path / "out")
    assert not report.ok
    assert len(report.failures) == 2
    assert report.n_synthetic == 10


def test_batch_rejects_unreadable_manifest(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"image": "a.png", "label": "print"}\nnot json\n')
    with pytest.raises(ValueError):
        run_batch(bad, None, out_dir=tmp_path / "out")


def test_batch_jpeg_and_layers(tmp_path):
    ds = write_dataset(tmp_path, 0, 1, 0)
    cfg = SynthConfig(grid=(8, 8), image_format="jpeg", dump_layers=True)
    report = run_batch(ds, cfg, out_dir=tmp_path / "out")
    synth = [r for r in report.records if r.synthetic]
    assert all(r.output_path.endswith(".jpg") for r in synth)
    assert len(list((tmp_path / "out" / "layers").glob("*_coverage.png"))) == 5
