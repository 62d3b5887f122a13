"""Checkpoint binary format: bitwise round-trip, corruption detection."""

import struct

import numpy as np
import pytest

from motionground.checkpoint import (
    MAGIC,
    Checkpoint,
    CheckpointFormatError,
    load_checkpoint,
    save_checkpoint,
)
from motionground.config import RunConfig
from motionground.model import GroundingModel
from motionground.optim import Adam


def small_config(**kw):
    base = dict(T=8, K=2, N=3, D=8, D_in=8, n_actions=4, n_objects=6,
                proposal_sizes=(2, 4), attention_heads=2, seed=5)
    base.update(kw)
    return RunConfig(**base)


def fresh_checkpoint(seed=5):
    cfg = small_config(seed=seed)
    model = GroundingModel(cfg)
    opt = Adam(model.params.tensors, lr=cfg.lr, clip_norm=cfg.clip_norm)
    return cfg, model, Checkpoint(
        config=cfg,
        params=model.snapshot(),
        opt_state={k: v.copy() for k, v in opt.state_tensors().items()},
        opt_step=0,
        epoch=3,
        best_metric=61.5,
    )


class TestRoundTrip:
    def test_bitwise_parameters(self, tmp_path):
        _, _, ckpt = fresh_checkpoint()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        back = load_checkpoint(path)
        assert set(back.params) == set(ckpt.params)
        for name, arr in ckpt.params.items():
            assert np.array_equal(back.params[name], arr)
            assert back.params[name].dtype == np.float64

    def test_metadata_preserved(self, tmp_path):
        cfg, _, ckpt = fresh_checkpoint()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        back = load_checkpoint(path)
        assert back.config == cfg
        assert back.epoch == 3
        assert back.best_metric == 61.5
        assert back.opt_step == 0

    def test_optimizer_state_split_from_params(self, tmp_path):
        _, _, ckpt = fresh_checkpoint()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        back = load_checkpoint(path)
        assert set(back.opt_state) == set(ckpt.opt_state)
        assert all(k.startswith("opt.") for k in back.opt_state)
        assert not any(k.startswith("opt.") for k in back.params)

    def test_save_load_save_identical_bytes(self, tmp_path):
        _, _, ckpt = fresh_checkpoint()
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        save_checkpoint(p1, ckpt)
        save_checkpoint(p2, load_checkpoint(p1))
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_missing_metric_allowed(self, tmp_path):
        _, _, ckpt = fresh_checkpoint()
        ckpt.best_metric = None
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        assert load_checkpoint(path).best_metric is None

    def test_restored_model_evaluates_identically(self, tmp_path):
        from motionground.synthdata import generate_sample

        cfg, model, ckpt = fresh_checkpoint()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        back = load_checkpoint(path)
        twin = GroundingModel(back.config)
        twin.load_state(back.params)
        sample = generate_sample(cfg.generator_config(), seed=2)
        assert model.predict(sample) == twin.predict(sample)


class TestCorruption:
    def _saved(self, tmp_path):
        _, _, ckpt = fresh_checkpoint()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(path, ckpt)
        return path

    def test_bad_magic(self, tmp_path):
        path = self._saved(tmp_path)
        raw = bytearray(open(path, "rb").read())
        raw[:4] = b"NOPE"
        open(path, "wb").write(bytes(raw))
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_flipped_payload_byte(self, tmp_path):
        path = self._saved(tmp_path)
        raw = bytearray(open(path, "rb").read())
        raw[len(raw) // 2] ^= 0xFF
        open(path, "wb").write(bytes(raw))
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = self._saved(tmp_path)
        raw = open(path, "rb").read()
        open(path, "wb").write(raw[: len(raw) - 20])
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_unknown_version(self, tmp_path):
        path = self._saved(tmp_path)
        raw = bytearray(open(path, "rb").read())
        # bump the version field and repair the trailer checksum
        import zlib

        raw[4:8] = struct.pack("<I", 99)
        blob = bytes(raw[4:-4])
        raw[-4:] = struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
        open(path, "wb").write(bytes(raw))
        with pytest.raises(CheckpointFormatError, match="version"):
            load_checkpoint(path)

    def test_magic_bytes_value(self, tmp_path):
        path = self._saved(tmp_path)
        assert open(path, "rb").read(4) == MAGIC == b"MARN"
