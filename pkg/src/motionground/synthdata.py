"""Synthetic grounding samples: object feature tracks with separate
appearance and motion channels, scripted events, and template queries.

Each sample is a little scene: K object slots observed over T frames.  Every
slot has an appearance class (what the thing looks like) and may host one
scripted event (an action over a frame interval, moving its box along a
trajectory).  Appearance features are the slot's class embedding plus noise,
constant over time; motion features are the action's class embedding during
its event and a shared rest-state embedding elsewhere.  The query names the
target (action, object) pair; the ground-truth segment is the target event's
interval normalized by T.

Confusable distractors reproduce the failure modes the architecture is built
around: a motion-confusable scene adds a second object with the *same
appearance class* doing a *different action* (appearance alone cannot pick
the right interval), an appearance-confusable scene adds the *same action*
on an object of a *different class* (motion alone cannot).

Class embeddings are orthonormal columns of a QR factorization seeded only
by the configuration, so cosine similarities between classes are exactly 0
before noise and every sample of one dataset shares the same embedding
basis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "GenerationError",
    "GeneratorConfig",
    "SceneEvent",
    "SceneScript",
    "GroundingSample",
    "class_embeddings",
    "vocabulary",
    "generate_scripted",
    "generate_sample",
    "generate_dataset",
    "parse_query",
    "oracle_slot_by_appearance",
    "oracle_slot_by_motion",
]

_FILLER_WORDS = ("the", "a", "is", "then")
_TRAJECTORIES = ("slide_h", "slide_v", "resize")
_EMBED_SEED = 1470  # basis depends on config dims only, never on the sample seed


class GenerationError(ValueError):
    """Configuration cannot produce a valid scene."""


@dataclass(frozen=True)
class GeneratorConfig:
    T: int = 32
    K: int = 4
    N: int = 4
    D_in: int = 32
    n_actions: int = 6
    n_objects: int = 8
    noise_sigma: float = 0.05
    min_event_frames: int = 4
    max_event_frames: int = 8
    motion_confusable: bool = False
    appearance_confusable: bool = False
    fixed_event: Optional[Tuple[int, int]] = None  # pin the target interval [start, end)

    def validate(self):
        if self.T < 4:
            raise GenerationError(f"T must be at least 4, got {self.T}")
        if self.K < 2:
            raise GenerationError(f"K must be at least 2, got {self.K}")
        if self.N < 2:
            raise GenerationError(f"N must be at least 2, got {self.N}")
        if self.n_actions + 1 > self.D_in or self.n_objects > self.D_in:
            raise GenerationError(
                f"D_in={self.D_in} too small for orthonormal embeddings of "
                f"{self.n_actions} actions (+rest) and {self.n_objects} objects"
            )
        if self.n_actions < 2 or self.n_objects < 2:
            raise GenerationError("need at least 2 action and 2 object classes")
        if not 1 <= self.min_event_frames <= self.max_event_frames <= self.T:
            raise GenerationError(
                f"event length range [{self.min_event_frames}, "
                f"{self.max_event_frames}] invalid for T={self.T}"
            )
        if self.fixed_event is not None:
            s, e = self.fixed_event
            if not 0 <= s < e <= self.T:
                raise GenerationError(f"fixed_event {self.fixed_event} outside [0, {self.T}]")


@dataclass
class SceneEvent:
    slot: int
    action: int
    start: int  # frame interval [start, end)
    end: int
    trajectory: str


@dataclass
class SceneScript:
    object_classes: List[int]  # appearance class per slot
    events: List[SceneEvent]
    target_slot: int
    target_action: int
    motion_confusable: bool
    appearance_confusable: bool

    @property
    def target_event(self) -> SceneEvent:
        for ev in self.events:
            if ev.slot == self.target_slot and ev.action == self.target_action:
                return ev
        raise LookupError("script has no target event")


@dataclass
class GroundingSample:
    appearance_local: np.ndarray  # (T, K, D_in)
    motion_local: np.ndarray  # (T, K, D_in)
    appearance_global: np.ndarray  # (T, D_in)
    motion_global: np.ndarray  # (T, D_in)
    boxes: np.ndarray  # (T, K, 4) as (cx, cy, w, h) in [0, 1]
    query_ids: np.ndarray  # (N,) int64
    gt_segment: Tuple[float, float]  # normalized, 0 <= start < end <= 1
    sample_id: str = ""

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        t, k, d = self.appearance_local.shape
        return t, k, len(self.query_ids), d


def class_embeddings(config: GeneratorConfig):
    """Orthonormal class bases: (object_emb, action_emb, rest_emb).

    Appearance and motion live in separate channels, so each family is
    orthonormalized independently within D_in.
    """
    rng = np.random.default_rng(_EMBED_SEED)
    def ortho(n):
        m = rng.normal(size=(config.D_in, n))
        q, r = np.linalg.qr(m)
        q *= np.sign(np.diag(r))  # deterministic sign convention
        return q.T.copy()

    object_emb = ortho(config.n_objects)
    motion = ortho(config.n_actions + 1)
    return object_emb, motion[: config.n_actions], motion[config.n_actions]


def vocabulary(config: GeneratorConfig) -> List[str]:
    """Token id order: filler words, then action words, then object words."""
    words = list(_FILLER_WORDS)
    words += [f"act{i}" for i in range(config.n_actions)]
    words += [f"obj{i}" for i in range(config.n_objects)]
    return words


def vocab_size(config: GeneratorConfig) -> int:
    return len(_FILLER_WORDS) + config.n_actions + config.n_objects


def _query_ids(config: GeneratorConfig, action: int, obj: int, rng) -> np.ndarray:
    """Template [filler..., <action>, <object>, filler...] of length N."""
    nf = config.N - 2
    lead = nf // 2
    fillers = rng.integers(0, len(_FILLER_WORDS), size=nf)
    ids = (
        list(fillers[:lead])
        + [len(_FILLER_WORDS) + action, len(_FILLER_WORDS) + config.n_actions + obj]
        + list(fillers[lead:])
    )
    return np.array(ids, dtype=np.int64)


def parse_query(query_ids: Sequence[int], config: GeneratorConfig) -> Tuple[int, int]:
    """Recover (action_class, object_class) from a template query."""
    action = obj = None
    base_a = len(_FILLER_WORDS)
    base_o = base_a + config.n_actions
    for tid in query_ids:
        if base_a <= tid < base_o:
            action = tid - base_a
        elif tid >= base_o:
            obj = tid - base_o
    if action is None or obj is None:
        raise ValueError("query does not contain an action and an object token")
    return action, obj


def _spread(lengths: List[int], lo: int, hi: int, rng) -> List[Tuple[int, int]]:
    """Disjoint intervals of the given lengths inside [lo, hi), in order,
    with the leftover space distributed as random gaps."""
    slack = (hi - lo) - sum(lengths)
    if slack < 0:
        raise GenerationError(
            f"events of total length {sum(lengths)} cannot fit in {hi - lo} frames"
        )
    cuts = sorted(int(c) for c in rng.integers(0, slack + 1, size=len(lengths)))
    gaps = np.diff([0] + cuts + [slack])
    out = []
    pos = lo
    for ln, gap in zip(lengths, gaps):
        pos += int(gap)
        out.append((pos, pos + ln))
        pos += ln
    return out


def _schedule(lengths: List[int], T: int, rng, pinned: Optional[Tuple[int, int]]):
    """Place disjoint intervals of the given lengths in [0, T).

    The first length may be pinned to an exact interval; the rest land in
    random positions, in a random left-to-right order.
    """
    order = list(rng.permutation(len(lengths)))
    if pinned is None:
        spread = _spread([lengths[i] for i in order], 0, T, rng)
        placed = [None] * len(lengths)
        for idx, span in zip(order, spread):
            placed[idx] = span
        return placed

    s, e = pinned
    if e - s != lengths[0]:
        raise GenerationError("pinned event length mismatch")
    rest = [i for i in order if i != 0]
    # split the remaining events between the space before and after the pin
    for attempt in range(60):
        left, right = [], []
        for i in rest:
            (left if rng.uniform() < 0.5 else right).append(i)
        if sum(lengths[i] for i in left) <= s and sum(lengths[i] for i in right) <= T - e:
            break
    else:
        raise GenerationError("events cannot fit around the pinned interval")
    placed = [None] * len(lengths)
    placed[0] = (s, e)
    for idx, span in zip(left, _spread([lengths[i] for i in left], 0, s, rng)):
        placed[idx] = span
    for idx, span in zip(right, _spread([lengths[i] for i in right], e, T, rng)):
        placed[idx] = span
    return placed


def _build_script(config: GeneratorConfig, rng) -> SceneScript:
    target_action = int(rng.integers(0, config.n_actions))
    target_class = int(rng.integers(0, config.n_objects))

    n_events = 1 + int(config.motion_confusable) + int(config.appearance_confusable)
    if n_events > config.K:
        raise GenerationError(f"{n_events} events need {n_events} slots, K={config.K}")

    slots = list(rng.permutation(config.K))
    target_slot = int(slots[0])
    distractor_slots = [int(s) for s in slots[1 : n_events]]

    # slot appearance classes: target gets its class; remaining slots get
    # classes distinct from the target's unless a distractor demands sharing
    classes = [0] * config.K
    classes[target_slot] = target_class
    other_classes = [c for c in range(config.n_objects) if c != target_class]
    for s in range(config.K):
        if s != target_slot:
            classes[s] = int(other_classes[rng.integers(0, len(other_classes))])

    spec_rows = [(target_slot, target_action)]
    di = iter(distractor_slots)
    if config.motion_confusable:
        slot = next(di)
        classes[slot] = target_class  # same look ...
        other_actions = [a for a in range(config.n_actions) if a != target_action]
        action = int(other_actions[rng.integers(0, len(other_actions))])  # ... different action
        spec_rows.append((slot, action))
    if config.appearance_confusable:
        slot = next(di)  # class already differs from the target's
        spec_rows.append((slot, target_action))  # same action, different look

    # lengths are redrawn until the events fit; small T with several events
    # would otherwise fail outright
    fixed_len = (
        config.fixed_event[1] - config.fixed_event[0]
        if config.fixed_event is not None
        else None
    )
    if n_events * config.min_event_frames + (
        0 if fixed_len is None else fixed_len - config.min_event_frames
    ) > config.T:
        raise GenerationError(
            f"{n_events} events of at least {config.min_event_frames} frames "
            f"cannot fit in {config.T} frames"
        )
    lengths = []
    budget = config.T
    for j in range(n_events):
        remaining_after = n_events - j - 1
        if j == 0 and fixed_len is not None:
            length = fixed_len
        else:
            hi = min(
                config.max_event_frames,
                budget - config.min_event_frames * remaining_after,
            )
            length = int(rng.integers(config.min_event_frames, hi + 1))
        lengths.append(length)
        budget -= length

    intervals = _schedule(lengths, config.T, rng, config.fixed_event)
    events = [
        SceneEvent(
            slot=slot,
            action=action,
            start=s,
            end=e,
            trajectory=_TRAJECTORIES[rng.integers(0, len(_TRAJECTORIES))],
        )
        for (slot, action), (s, e) in zip(spec_rows, intervals)
    ]
    return SceneScript(
        object_classes=classes,
        events=events,
        target_slot=target_slot,
        target_action=target_action,
        motion_confusable=config.motion_confusable,
        appearance_confusable=config.appearance_confusable,
    )


def _boxes_for_slot(config: GeneratorConfig, event: Optional[SceneEvent], rng) -> np.ndarray:
    cx = rng.uniform(0.25, 0.75)
    cy = rng.uniform(0.25, 0.75)
    w = rng.uniform(0.1, 0.3)
    h = rng.uniform(0.1, 0.3)
    boxes = np.tile([cx, cy, w, h], (config.T, 1))
    if event is not None:
        n = event.end - event.start
        ramp = np.linspace(0.0, 1.0, n)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        span = slice(event.start, event.end)
        if event.trajectory == "slide_h":
            boxes[span, 0] = np.clip(cx + sign * 0.2 * ramp, 0.05, 0.95)
        elif event.trajectory == "slide_v":
            boxes[span, 1] = np.clip(cy + sign * 0.2 * ramp, 0.05, 0.95)
        else:  # resize
            factor = 1.0 + sign * 0.5 * ramp
            boxes[span, 2] = np.clip(w * factor, 0.05, 0.5)
            boxes[span, 3] = np.clip(h * factor, 0.05, 0.5)
        # the object stays displaced/resized after its event
        boxes[event.end :] = boxes[event.end - 1]
    return boxes


def generate_scripted(
    config: GeneratorConfig, seed: int
) -> Tuple[GroundingSample, SceneScript]:
    """Generate one sample plus the script that produced it."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    script = _build_script(config, rng)
    object_emb, action_emb, rest_emb = class_embeddings(config)
    T, K, D = config.T, config.K, config.D_in

    event_by_slot = {ev.slot: ev for ev in script.events}

    app = np.empty((T, K, D))
    mot = np.empty((T, K, D))
    boxes = np.empty((T, K, 4))
    for k in range(K):
        app[:, k, :] = object_emb[script.object_classes[k]]
        mot[:, k, :] = rest_emb
        ev = event_by_slot.get(k)
        if ev is not None:
            mot[ev.start : ev.end, k, :] = action_emb[ev.action]
        boxes[:, k, :] = _boxes_for_slot(config, ev, rng)

    app_global = np.tile(
        object_emb[script.object_classes].mean(axis=0), (T, 1)
    )
    mot_global = np.tile(rest_emb, (T, 1))
    for ev in script.events:
        mot_global[ev.start : ev.end] = action_emb[ev.action]

    sigma = config.noise_sigma
    app += rng.normal(0.0, sigma, size=app.shape)
    mot += rng.normal(0.0, sigma, size=mot.shape)
    app_global += rng.normal(0.0, sigma, size=app_global.shape)
    mot_global += rng.normal(0.0, sigma, size=mot_global.shape)

    tgt = script.target_event
    sample = GroundingSample(
        appearance_local=app,
        motion_local=mot,
        appearance_global=app_global,
        motion_global=mot_global,
        boxes=boxes,
        query_ids=_query_ids(config, script.target_action,
                             script.object_classes[script.target_slot], rng),
        gt_segment=(tgt.start / T, tgt.end / T),
        sample_id=f"s{seed:08d}",
    )
    return sample, script


def generate_sample(config: GeneratorConfig, seed: int) -> GroundingSample:
    return generate_scripted(config, seed)[0]


def generate_dataset(
    config: GeneratorConfig,
    count: int,
    seed: int,
    motion_frac: float = 0.0,
    appearance_frac: float = 0.0,
    both_frac: float = 0.0,
):
    """A list of (sample, script) pairs with a deterministic confusability mix.

    Per-sample seeds are derived from ``seed``, and each sample's flags are
    drawn from the mix fractions; the remainder is distractor-free.
    """
    if motion_frac + appearance_frac + both_frac > 1.0 + 1e-9:
        raise GenerationError("confusability fractions exceed 1")
    mix_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    out = []
    for i in range(count):
        u = mix_rng.uniform()
        motion = u < motion_frac + both_frac
        appearance = (u >= motion_frac) and (u < motion_frac + appearance_frac + both_frac)
        cfg = dataclasses.replace(
            config, motion_confusable=motion, appearance_confusable=appearance
        )
        sample, script = generate_scripted(cfg, seed * 1_000_003 + i)
        sample.sample_id = f"g{seed}-{i:05d}"
        out.append((sample, script))
    return out


# -- nearest-class oracles --------------------------------------------------
#
# Deliberately model-free: they answer "is the task solvable from the raw
# features" and "is a confusable scene genuinely ambiguous for one channel".


def _cos(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na * nb < 1e-12:
        return 0.0
    return float(a @ b / (na * nb))


def oracle_slot_by_appearance(
    sample: GroundingSample,
    config: GeneratorConfig,
    candidates: Optional[Sequence[int]] = None,
) -> int:
    """Slot whose time-averaged appearance features best match the queried
    object class embedding."""
    object_emb, _, _ = class_embeddings(config)
    _, obj = parse_query(sample.query_ids, config)
    target = object_emb[obj]
    slots = list(candidates) if candidates is not None else list(range(config.K))
    means = sample.appearance_local.mean(axis=0)
    scores = [_cos(means[k], target) for k in slots]
    return slots[int(np.argmax(scores))]


def oracle_slot_by_motion(
    sample: GroundingSample,
    script: SceneScript,
    config: GeneratorConfig,
    candidates: Optional[Sequence[int]] = None,
) -> int:
    """Slot whose motion features during its own event best match the queried
    action class embedding; slots without events score on their full track."""
    _, action_emb, _ = class_embeddings(config)
    action, _ = parse_query(sample.query_ids, config)
    target = action_emb[action]
    slots = list(candidates) if candidates is not None else list(range(config.K))
    event_by_slot = {ev.slot: ev for ev in script.events}
    scores = []
    for k in slots:
        ev = event_by_slot.get(k)
        if ev is not None:
            feat = sample.motion_local[ev.start : ev.end, k].mean(axis=0)
        else:
            feat = sample.motion_local[:, k].mean(axis=0)
        scores.append(_cos(feat, target))
    return slots[int(np.argmax(scores))]
