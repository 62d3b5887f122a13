"""Generator: determinism, scene invariants, confusability geometry,
nearest-class oracle sanity, and the binary dataset round trip."""

import dataclasses
import os
import struct

import numpy as np
import pytest

from motionground import synthdata as sd
from motionground.dataset_io import (
    DatasetFormatError,
    manifest_path,
    read_dataset,
    write_dataset,
)

BASE = sd.GeneratorConfig()


def cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestGeneration:
    def test_pinned_event_normalizes_directly(self):
        cfg = dataclasses.replace(BASE, fixed_event=(8, 16))
        sample = sd.generate_sample(cfg, seed=0)
        assert sample.gt_segment == (0.25, 0.5)

    def test_same_config_seed_is_byte_identical(self):
        a = sd.generate_sample(BASE, seed=41)
        b = sd.generate_sample(BASE, seed=41)
        for field in (
            "appearance_local",
            "motion_local",
            "appearance_global",
            "motion_global",
            "boxes",
            "query_ids",
        ):
            assert np.array_equal(getattr(a, field), getattr(b, field)), field
        assert a.gt_segment == b.gt_segment

    def test_different_seeds_differ(self):
        a = sd.generate_sample(BASE, seed=1)
        b = sd.generate_sample(BASE, seed=2)
        assert not np.array_equal(a.appearance_local, b.appearance_local)

    def test_scene_invariants_fuzz(self):
        """Box geometry, segment ordering, and dims over 1000 seeds."""
        for seed in range(1000):
            cfg = dataclasses.replace(
                BASE,
                motion_confusable=seed % 3 == 0,
                appearance_confusable=seed % 4 == 0,
            )
            s = sd.generate_sample(cfg, seed)
            assert s.dims == (cfg.T, cfg.K, cfg.N, cfg.D_in)
            assert np.all(s.boxes >= 0.0) and np.all(s.boxes <= 1.0)
            assert np.all(s.boxes[:, :, 2:] > 0.0)
            lo, hi = s.gt_segment
            assert 0.0 <= lo < hi <= 1.0

    def test_events_disjoint_and_inside_range(self):
        for seed in range(200):
            cfg = dataclasses.replace(
                BASE, motion_confusable=True, appearance_confusable=True
            )
            _, script = sd.generate_scripted(cfg, seed)
            spans = sorted((ev.start, ev.end) for ev in script.events)
            for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
                assert a1 <= b0
            for s, e in spans:
                assert 0 <= s < e <= cfg.T

    def test_embeddings_orthonormal(self):
        obj, act, rest = sd.class_embeddings(BASE)
        np.testing.assert_allclose(obj @ obj.T, np.eye(len(obj)), atol=1e-10)
        full = np.vstack([act, rest])
        np.testing.assert_allclose(full @ full.T, np.eye(len(full)), atol=1e-10)

    def test_motion_confusable_geometry(self):
        """The two same-class objects look alike; their event motions do not."""
        cfg = dataclasses.replace(BASE, motion_confusable=True)
        hits = 0
        for seed in range(20):
            sample, script = sd.generate_scripted(cfg, seed)
            tgt = script.target_event
            other = next(ev for ev in script.events if ev.slot != tgt.slot)
            assert script.object_classes[tgt.slot] == script.object_classes[other.slot]
            assert other.action != tgt.action
            a1 = sample.appearance_local[:, tgt.slot].mean(axis=0)
            a2 = sample.appearance_local[:, other.slot].mean(axis=0)
            assert cos(a1, a2) > 0.9
            m1 = sample.motion_local[tgt.start : tgt.end, tgt.slot].mean(axis=0)
            m2 = sample.motion_local[other.start : other.end, other.slot].mean(axis=0)
            assert cos(m1, m2) < 0.5
            hits += 1
        assert hits == 20

    def test_appearance_confusable_geometry(self):
        cfg = dataclasses.replace(BASE, appearance_confusable=True)
        for seed in range(20):
            sample, script = sd.generate_scripted(cfg, seed)
            tgt = script.target_event
            other = next(ev for ev in script.events if ev.slot != tgt.slot)
            assert other.action == tgt.action
            assert script.object_classes[other.slot] != script.object_classes[tgt.slot]

    def test_same_class_rows_high_cosine_cross_class_low(self):
        sample, script = sd.generate_scripted(BASE, seed=7)
        obj, _, _ = sd.class_embeddings(BASE)
        for k in range(BASE.K):
            row = sample.appearance_local[0, k]
            clean = obj[script.object_classes[k]]
            assert cos(row, clean) > 0.9
            for c in range(BASE.n_objects):
                if c != script.object_classes[k]:
                    assert cos(row, obj[c]) < 0.5

    def test_infeasible_script_raises(self):
        cfg = dataclasses.replace(
            BASE,
            T=8,
            min_event_frames=4,
            max_event_frames=4,
            motion_confusable=True,
            appearance_confusable=True,
        )
        with pytest.raises(sd.GenerationError):
            sd.generate_sample(cfg, seed=0)

    def test_config_validation(self):
        with pytest.raises(sd.GenerationError):
            dataclasses.replace(BASE, T=2).validate()
        with pytest.raises(sd.GenerationError):
            dataclasses.replace(BASE, K=1).validate()
        with pytest.raises(sd.GenerationError):
            dataclasses.replace(BASE, D_in=4).validate()

    def test_query_template_and_parse(self):
        sample, script = sd.generate_scripted(BASE, seed=3)
        action, obj = sd.parse_query(sample.query_ids, BASE)
        assert action == script.target_action
        assert obj == script.object_classes[script.target_slot]
        words = sd.vocabulary(BASE)
        assert len(words) == sd.vocab_size(BASE)
        tokens = [words[i] for i in sample.query_ids]
        assert f"act{action}" in tokens and f"obj{obj}" in tokens

    def test_dataset_mix_deterministic(self):
        a = sd.generate_dataset(BASE, 12, seed=5, motion_frac=0.3, appearance_frac=0.3)
        b = sd.generate_dataset(BASE, 12, seed=5, motion_frac=0.3, appearance_frac=0.3)
        for (sa, _), (sb, _) in zip(a, b):
            assert np.array_equal(sa.appearance_local, sb.appearance_local)
            assert sa.sample_id == sb.sample_id
        kinds = {(s.motion_confusable, s.appearance_confusable) for _, s in a}
        assert len(kinds) > 1  # the mix actually mixes


class TestOracles:
    def test_clean_data_solvable_by_appearance_matching(self):
        hits = 0
        n = 200
        for seed in range(n):
            sample, script = sd.generate_scripted(BASE, seed)
            if sd.oracle_slot_by_appearance(sample, BASE) == script.target_slot:
                hits += 1
        assert hits / n >= 0.95

    def test_motion_confusable_defeats_appearance_matching(self):
        cfg = dataclasses.replace(BASE, motion_confusable=True)
        distractor_picks = 0
        n = 300
        for seed in range(n):
            sample, script = sd.generate_scripted(cfg, seed)
            tgt = script.target_event.slot
            other = next(ev.slot for ev in script.events if ev.slot != tgt)
            pick = sd.oracle_slot_by_appearance(sample, cfg, candidates=[tgt, other])
            if pick == other:
                distractor_picks += 1
        assert distractor_picks / n >= 0.40

    def test_appearance_confusable_defeats_motion_matching(self):
        cfg = dataclasses.replace(BASE, appearance_confusable=True)
        distractor_picks = 0
        n = 300
        for seed in range(n):
            sample, script = sd.generate_scripted(cfg, seed)
            tgt = script.target_event.slot
            other = next(ev.slot for ev in script.events if ev.slot != tgt)
            pick = sd.oracle_slot_by_motion(sample, script, cfg, candidates=[tgt, other])
            if pick == other:
                distractor_picks += 1
        assert distractor_picks / n >= 0.40

    def test_motion_matching_resolves_motion_confusable(self):
        """The flip side: the motion channel does separate the two."""
        cfg = dataclasses.replace(BASE, motion_confusable=True)
        hits = 0
        n = 100
        for seed in range(n):
            sample, script = sd.generate_scripted(cfg, seed)
            tgt = script.target_event.slot
            other = next(ev.slot for ev in script.events if ev.slot != tgt)
            if sd.oracle_slot_by_motion(sample, script, cfg, [tgt, other]) == tgt:
                hits += 1
        assert hits / n >= 0.95


class TestDatasetIO:
    def test_round_trip_bitwise(self, tmp_path):
        samples = [s for s, _ in sd.generate_dataset(BASE, 4, seed=11, motion_frac=0.5)]
        path = str(tmp_path / "set.mgds")
        write_dataset(samples, path, config=BASE)
        back = read_dataset(path)
        assert len(back) == len(samples)
        for orig, got in zip(samples, back):
            assert np.array_equal(orig.appearance_local, got.appearance_local)
            assert np.array_equal(orig.motion_local, got.motion_local)
            assert np.array_equal(orig.appearance_global, got.appearance_global)
            assert np.array_equal(orig.motion_global, got.motion_global)
            assert np.array_equal(orig.boxes, got.boxes)
            assert np.array_equal(orig.query_ids, got.query_ids)
            assert orig.gt_segment == got.gt_segment
            assert orig.sample_id == got.sample_id

    def test_file_size_matches_format_arithmetic(self, tmp_path):
        cfg = dataclasses.replace(BASE, T=8, K=2, D_in=16)
        samples = [sd.generate_sample(cfg, s) for s in range(10)]
        path = str(tmp_path / "sized.mgds")
        write_dataset(samples, path)
        t, k, n, d = cfg.T, cfg.K, cfg.N, cfg.D_in
        per_sample = 16 + 16 + 4 * n + 8 * (2 * t * k * d + 2 * t * d + 4 * t * k) + 4
        assert os.path.getsize(path) == 16 + 10 * per_sample

    def test_truncated_file_is_reported_not_crashed(self, tmp_path):
        samples = [sd.generate_sample(BASE, 0)]
        path = str(tmp_path / "trunc.mgds")
        write_dataset(samples, path)
        data = open(path, "rb").read()
        open(path, "wb").write(data[: len(data) - 37])
        with pytest.raises(DatasetFormatError, match="truncated"):
            read_dataset(path)

    def test_corrupted_payload_fails_checksum(self, tmp_path):
        samples = [sd.generate_sample(BASE, 0)]
        path = str(tmp_path / "corrupt.mgds")
        write_dataset(samples, path)
        data = bytearray(open(path, "rb").read())
        data[200] ^= 0xFF
        open(path, "wb").write(bytes(data))
        with pytest.raises(DatasetFormatError, match="checksum"):
            read_dataset(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = str(tmp_path / "bad.mgds")
        open(path, "wb").write(b"NOPE" + struct.pack("<IQ", 1, 0))
        with pytest.raises(DatasetFormatError, match="magic"):
            read_dataset(path)

    def test_manifest_readable_and_carries_ids(self, tmp_path):
        import json

        samples = [s for s, _ in sd.generate_dataset(BASE, 3, seed=2)]
        path = str(tmp_path / "m.mgds")
        write_dataset(samples, path, config=BASE)
        lines = [json.loads(l) for l in open(manifest_path(path))]
        assert [l["id"] for l in lines] == [s.sample_id for s in samples]
        assert all("query_tokens" in l and "gt_segment" in l for l in lines)
