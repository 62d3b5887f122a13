"""Reasoning branch: attention laws, gating bounds, graph residual identity,
brute-force affinity, convex-hull fusion, symmetry, and the full-branch
gradient oracle."""

import numpy as np
import pytest

from motionground import gradcheck
from motionground import tensor as tg
from motionground.branch import BaselineBranch, ReasoningBranch
from motionground.layers import ParamSet
from motionground.tensor import Tensor


def make_branch(seed=0, d=4, **kw):
    ps = ParamSet(np.random.default_rng(seed))
    return ReasoningBranch(ps, "b", d, **kw), ps


def rand_inputs(rng, t, k, n, d):
    f = Tensor(rng.normal(size=(t * k, d)), requires_grad=True)
    q = Tensor(rng.normal(size=(n, d)), requires_grad=True)
    qg = Tensor(rng.normal(size=d), requires_grad=True)
    return f, q, qg


class TestInteraction:
    def test_word_attention_rows_stochastic(self):
        branch, _ = make_branch(d=6)
        rng = np.random.default_rng(1)
        f = Tensor(rng.normal(size=(8, 6)))
        q = Tensor(rng.normal(size=(3, 6)))
        a = (f @ branch.obj_proj).reshape(8, 1, -1)
        b = (q @ branch.word_proj).reshape(1, 3, -1)
        scores = (tg.tanh(a + b + branch.score_bias) * branch.score_vec).sum(axis=2)
        attn = tg.softmax(scores, axis=1)
        np.testing.assert_allclose(attn.data.sum(axis=1), np.ones(8), atol=1e-12)

    def test_single_word_attended_feature_is_that_word(self):
        """With one word the softmax is a singleton, so the gate sees exactly
        that word's feature regardless of scores."""
        branch, _ = make_branch(seed=2, d=4)
        rng = np.random.default_rng(3)
        f = Tensor(rng.normal(size=(6, 4)))
        q = Tensor(rng.normal(size=(1, 4)))
        out = branch.interact(f, q)
        gate = tg.sigmoid(branch.gate(tg.broadcast_rows(q.reshape(-1), 6)))
        np.testing.assert_allclose(out.data, gate.data * f.data, atol=1e-12)

    def test_gate_shrinks_magnitudes(self):
        branch, _ = make_branch(seed=4, d=5)
        rng = np.random.default_rng(5)
        f = Tensor(rng.normal(size=(10, 5)))
        q = Tensor(rng.normal(size=(3, 5)))
        out = branch.interact(f, q)
        assert np.all(np.abs(out.data) <= np.abs(f.data) + 1e-15)


class TestGraph:
    def test_affinity_rows_stochastic_positive(self):
        branch, _ = make_branch(seed=6, d=4)
        rng = np.random.default_rng(7)
        f = Tensor(rng.normal(size=(9, 4)))
        _, affinity = branch.graph_update(f)
        np.testing.assert_allclose(affinity.data.sum(axis=1), np.ones(9), atol=1e-12)
        assert np.all(affinity.data > 0)

    def test_zero_graph_weights_give_residual_identity(self):
        branch, _ = make_branch(seed=8, d=4)
        branch.graph_layers[0]["mix"].data[:] = 0.0
        rng = np.random.default_rng(9)
        f = Tensor(rng.normal(size=(6, 4)))
        out, _ = branch.graph_update(f)
        np.testing.assert_allclose(out.data, f.data, atol=1e-12)
        branch2, _ = make_branch(seed=8, d=4)
        branch2.graph_layers[0]["out"].data[:] = 0.0
        out2, _ = branch2.graph_update(f)
        np.testing.assert_allclose(out2.data, f.data, atol=1e-12)

    def test_affinity_matches_brute_force_with_identity_projections(self):
        branch, _ = make_branch(seed=10, d=2)
        branch.graph_layers[0]["src"].data[:] = np.eye(2)
        branch.graph_layers[0]["dst"].data[:] = np.eye(2)
        f = np.array([[1.0, 0.5], [-0.25, 2.0], [0.75, -1.0]])
        _, affinity = branch.graph_update(Tensor(f))
        logits = f @ f.T
        expected = np.empty((3, 3))
        for i in range(3):
            row = np.exp(logits[i] - logits[i].max())
            expected[i] = row / row.sum()
        np.testing.assert_allclose(affinity.data, expected, atol=1e-12)

    def test_optional_affinity_scaling(self):
        b1, _ = make_branch(seed=11, d=4, scale_affinity=True)
        assert b1.scale == pytest.approx(0.5)
        b2, _ = make_branch(seed=11, d=4)
        assert b2.scale == 1.0


class TestFusion:
    def test_scores_are_cosines_in_range(self):
        branch, _ = make_branch(seed=12, d=4)
        rng = np.random.default_rng(13)
        f = Tensor(rng.normal(size=(8, 4)))
        qg = Tensor(rng.normal(size=4))
        _, scores = branch.fuse(f, qg, t=4, k=2)
        assert np.all(scores.data >= -1.0 - 1e-12)
        assert np.all(scores.data <= 1.0 + 1e-12)

    def test_single_object_frame_passes_through(self):
        branch, _ = make_branch(seed=14, d=4)
        rng = np.random.default_rng(15)
        f = Tensor(rng.normal(size=(5, 4)))
        qg = Tensor(rng.normal(size=4))
        h, _ = branch.fuse(f, qg, t=5, k=1)
        np.testing.assert_allclose(h.data, f.data, atol=1e-12)

    def test_frame_features_in_convex_hull(self):
        """h_t must be a convex combination of the frame's object rows;
        recompute the weights independently and compare."""
        branch, _ = make_branch(seed=16, d=6)
        rng = np.random.default_rng(17)
        t, k = 4, 3
        f = rng.normal(size=(t * k, 6))
        qg = rng.normal(size=6)
        h, scores = branch.fuse(Tensor(f), Tensor(qg), t=t, k=k)
        for ti in range(t):
            row = scores.data[ti]
            lam = np.exp(row - row.max())
            lam /= lam.sum()
            assert np.all(lam >= 0) and lam.sum() == pytest.approx(1.0)
            expected = lam @ f.reshape(t, k, 6)[ti]
            np.testing.assert_allclose(h.data[ti], expected, atol=1e-12)

    def test_query_scale_invariance(self):
        branch, _ = make_branch(seed=18, d=4)
        rng = np.random.default_rng(19)
        f = Tensor(rng.normal(size=(6, 4)))
        qg = rng.normal(size=4)
        h1, c1 = branch.fuse(f, Tensor(qg), t=3, k=2)
        h2, c2 = branch.fuse(f, Tensor(qg * 7.5), t=3, k=2)
        np.testing.assert_allclose(c1.data, c2.data, atol=1e-12)
        np.testing.assert_allclose(h1.data, h2.data, atol=1e-12)


class TestWholeBranch:
    def test_slot_permutation_leaves_frames_unchanged(self):
        branch, _ = make_branch(seed=20, d=4)
        rng = np.random.default_rng(21)
        t, k, d = 3, 3, 4
        f = rng.normal(size=(t, k, d))
        q = Tensor(rng.normal(size=(2, d)))
        qg = Tensor(rng.normal(size=d))
        out1 = branch(Tensor(f.reshape(t * k, d)), q, qg, t, k)
        perm = [2, 0, 1]
        out2 = branch(Tensor(f[:, perm].reshape(t * k, d)), q, qg, t, k)
        np.testing.assert_allclose(out2.H.data, out1.H.data, atol=1e-10)

    def test_full_branch_gradient_oracle(self):
        t, k, n, d = 3, 2, 2, 4
        branch, ps = make_branch(seed=22, d=d)
        rng = np.random.default_rng(23)
        f, q, qg = rand_inputs(rng, t, k, n, d)
        inputs = [f, q, qg] + list(ps.tensors.values())

        def run(ts):
            return branch(ts[0], ts[1], ts[2], t, k).H.sum()

        err = gradcheck.check_op(run, inputs, eps=1e-5)
        assert err < 1e-4

    def test_shape_guard(self):
        branch, _ = make_branch(seed=24, d=4)
        rng = np.random.default_rng(25)
        with pytest.raises(tg.ShapeError):
            branch(Tensor(rng.normal(size=(5, 4))),
                   Tensor(rng.normal(size=(2, 4))),
                   Tensor(rng.normal(size=4)), t=3, k=2)


class TestBaselineBranch:
    def test_shapes_and_mean_pool(self):
        ps = ParamSet(np.random.default_rng(26))
        branch = BaselineBranch(ps, "base", d=4)
        rng = np.random.default_rng(27)
        t, k = 3, 2
        f = Tensor(rng.normal(size=(t * k, 4)))
        q = Tensor(rng.normal(size=(2, 4)))
        qg = Tensor(rng.normal(size=4))
        out = branch(f, q, qg, t, k)
        assert out.H.shape == (t, 4)
        np.testing.assert_allclose(
            out.H.data, out.F_tilde.data.reshape(t, k, 4).mean(axis=1), atol=1e-12
        )
        np.testing.assert_allclose(out.scores.data, np.full((t, k), 0.5))

    def test_gradient_oracle(self):
        t, k, n, d = 3, 2, 2, 4
        ps = ParamSet(np.random.default_rng(28))
        branch = BaselineBranch(ps, "base", d=d)
        rng = np.random.default_rng(29)
        f, q, qg = rand_inputs(rng, t, k, n, d)
        inputs = [f, q] + list(ps.tensors.values())

        def run(ts):
            return branch(ts[0], ts[1], qg, t, k).H.sum()

        err = gradcheck.check_op(run, inputs, eps=1e-5)
        assert err < 1e-4
