"""Model assembly: variant wiring, stream usage, parameter bookkeeping."""

import numpy as np
import pytest

from motionground.config import RunConfig
from motionground.grounding import grounding_loss
from motionground.model import (
    VARIANTS,
    GroundingModel,
    build_variant,
    variant_config,
)
from motionground.synthdata import generate_sample


def tiny_config(**kw):
    base = dict(T=12, K=3, N=4, D=16, D_in=16, proposal_sizes=(2, 4, 8),
                attention_heads=4, seed=1)
    base.update(kw)
    return RunConfig(**base)


def tiny_sample(cfg, seed=4):
    return generate_sample(
        cfg.generator_config(min_event_frames=3, max_event_frames=4), seed
    )


class TestVariants:
    def test_ladder_names(self):
        assert VARIANTS == (
            "baseline",
            "object-reasoning",
            "motion-encoder",
            "motion-branch",
            "enhance-appearance",
            "enhance-motion",
            "full",
        )

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            variant_config(tiny_config(), "bogus")

    def test_all_variants_are_valid_configs(self):
        for name in VARIANTS:
            variant_config(tiny_config(), name)

    def test_full_flags(self):
        cfg = variant_config(tiny_config(), "full")
        assert cfg.appearance_branch and cfg.motion_encoder
        assert cfg.motion_branch and cfg.maa
        assert cfg.maa_motion_guided and cfg.maa_appearance_fused

    def test_baseline_flags(self):
        cfg = variant_config(tiny_config(), "baseline")
        assert not any([cfg.appearance_branch, cfg.motion_encoder,
                        cfg.motion_branch, cfg.maa])

    def test_parameter_count_grows_along_ladder(self):
        cfg = tiny_config()
        counts = {v: build_variant(cfg, v).parameter_count() for v in VARIANTS}
        ladder = ["baseline", "object-reasoning", "motion-encoder",
                  "motion-branch", "full"]
        for a, b in zip(ladder, ladder[1:]):
            assert counts[a] < counts[b]
        # the motion-stream enhancement is parameterless
        assert counts["enhance-motion"] == counts["motion-branch"]
        assert counts["enhance-appearance"] == counts["full"]

    def test_full_exceeds_baseline(self):
        cfg = tiny_config()
        assert (build_variant(cfg, "full").parameter_count()
                > build_variant(cfg, "baseline").parameter_count())


class TestStreamUsage:
    def _loss_value(self, model, sample):
        total, _, _, _ = model.loss(sample)
        return total.item()

    def test_baseline_ignores_motion_features(self):
        cfg = tiny_config()
        sample = tiny_sample(cfg)
        model = build_variant(cfg, "baseline")
        before = self._loss_value(model, sample)
        sample.motion_local += 10.0
        sample.motion_global -= 5.0
        assert self._loss_value(model, sample) == before

    def test_object_reasoning_ignores_motion_features(self):
        cfg = tiny_config()
        sample = tiny_sample(cfg)
        model = build_variant(cfg, "object-reasoning")
        before = self._loss_value(model, sample)
        sample.motion_local += 10.0
        assert self._loss_value(model, sample) == before

    def test_motion_encoder_consumes_motion_features(self):
        cfg = tiny_config()
        sample = tiny_sample(cfg)
        model = build_variant(cfg, "motion-encoder")
        before = self._loss_value(model, sample)
        sample.motion_local += 1.0
        assert self._loss_value(model, sample) != before

    def test_every_variant_consumes_appearance(self):
        cfg = tiny_config()
        for name in VARIANTS:
            sample = tiny_sample(cfg)
            model = build_variant(cfg, name)
            before = self._loss_value(model, sample)
            sample.appearance_local += 1.0
            assert self._loss_value(model, sample) != before, name


class TestForward:
    def test_output_shapes(self):
        cfg = tiny_config()
        model = GroundingModel(variant_config(cfg, "full"))
        out = model.forward(tiny_sample(cfg))
        r = len(model.anchors)
        assert out.frames.shape == (cfg.T, cfg.D)
        assert out.proposals.confidence.shape == (r,)
        assert out.proposals.offset_start.shape == (r,)
        assert out.appearance.scores.shape == (cfg.T, cfg.K)
        assert out.motion.scores.shape == (cfg.T, cfg.K)
        assert out.fusion.appearance_weights.shape == (cfg.T,)

    def test_baseline_has_no_motion_diagnostics(self):
        cfg = tiny_config()
        out = build_variant(cfg, "baseline").forward(tiny_sample(cfg))
        assert out.motion is None and out.fusion is None

    def test_loss_matches_head_recomputation(self):
        cfg = tiny_config()
        sample = tiny_sample(cfg)
        model = build_variant(cfg, "full")
        total, conf, bound, out = model.loss(sample)
        again, _, _ = grounding_loss(
            out.proposals, sample.gt_segment,
            positive_threshold=cfg.positive_threshold,
            boundary_weight=cfg.boundary_weight,
        )
        assert total.item() == again.item()

    def test_predict_sorted_and_bounded(self):
        cfg = tiny_config()
        model = build_variant(cfg, "full")
        preds = model.predict(tiny_sample(cfg), top_n=3)
        assert 1 <= len(preds) <= 3
        scores = [p[2] for p in preds]
        assert scores == sorted(scores, reverse=True)
        for s, e, _ in preds:
            assert 0.0 <= s < e <= 1.0


class TestDeterminismAndState:
    def test_same_seed_same_init(self):
        cfg = tiny_config(seed=7)
        a = GroundingModel(cfg)
        b = GroundingModel(cfg)
        for name, t in a.params.tensors.items():
            np.testing.assert_array_equal(t.data, b.params.tensors[name].data)

    def test_different_seed_different_init(self):
        a = GroundingModel(tiny_config(seed=1))
        b = GroundingModel(tiny_config(seed=2))
        assert any(
            not np.array_equal(t.data, b.params.tensors[n].data)
            for n, t in a.params.tensors.items()
        )

    def test_state_round_trip(self):
        cfg = tiny_config()
        a = GroundingModel(cfg)
        b = GroundingModel(tiny_config(seed=99))
        b.load_state(a.snapshot())
        sample = tiny_sample(cfg)
        assert a.loss(sample)[0].item() == b.loss(sample)[0].item()

    def test_load_state_validates_names_and_shapes(self):
        cfg = tiny_config()
        model = GroundingModel(cfg)
        good = model.snapshot()
        missing = dict(good)
        missing.pop(next(iter(missing)))
        with pytest.raises(ValueError):
            model.load_state(missing)
        bad_shape = dict(good)
        first = next(iter(bad_shape))
        bad_shape[first] = np.zeros((1, 1))
        with pytest.raises(ValueError):
            model.load_state(bad_shape)
