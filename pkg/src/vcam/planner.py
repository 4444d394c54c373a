"""Convert a "P-in Q-out" view request into an explicit dependency graph of
fixed-window forward passes.

Dispatch summary (context window T, P inputs, Q targets):
  - P + Q <= T: a single pass, padded to exactly T frames by repeating the
    first input image.
  - one_pass strategy: targets split into independent chunks, each pass
    conditioning on all inputs.
  - interp / gt_interp (trajectory): anchors picked along the path with stride
    floor(Q / (T - 2)) (floor(Q / (T - P - 2)) when inputs ride along), capped
    so segment passes fit the window; segments between consecutive anchors are
    generated conditioned on their two flanking anchors.
  - nearest / gt_nearest (set): anchors are either supplied explicitly or
    drawn uniformly from the targets; remaining targets chunk to their
    nearest anchor by camera descriptor distance.
  - When the anchor set exceeds the first pass, the pass extends zero-shot
    (when allowed), is thinned to fit, or -- for long paths where the stride
    had to be capped -- anchors are generated autoregressively in groups,
    each group retrieving its spatially nearest predecessors from the memory
    bank.

Planning is pure: identical (request, config) inputs give identical plans.
Pass seeds are config.seed + pass id.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Camera, camera_descriptor

STRATEGIES = ("one_pass", "nearest", "gt_nearest", "interp", "gt_interp", "auto")
TASKS = ("set", "trajectory")
PAD = "pad_repeat_first_input"


class PlanError(ValueError):
    """Raised for invalid or contradictory planner configurations."""


@dataclass(frozen=True)
class ViewRequest:
    """Ordered input and target camera lists: the P-in Q-out problem."""

    input_cameras: tuple[Camera, ...]
    target_cameras: tuple[Camera, ...]
    task: str = "trajectory"
    ordered_targets: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_cameras", tuple(self.input_cameras))
        object.__setattr__(self, "target_cameras", tuple(self.target_cameras))
        if not self.input_cameras:
            raise PlanError("need at least one input camera")
        if not self.target_cameras:
            raise PlanError("need at least one target camera")
        if self.task not in TASKS:
            raise PlanError(f"unknown task {self.task!r}")
        if self.task == "trajectory" and not self.ordered_targets:
            raise PlanError("trajectory requests require ordered targets")


@dataclass(frozen=True)
class PlannerConfig:
    context_window: int = 21
    strategy: str = "auto"
    cfg_scale: float = 3.0
    seed: int = 0
    anchors_per_pass: int | None = None  # memory-bank group size G; None = floor(T/2), clamped
    retrieval_count: int | None = None  # bank retrievals R per pass; None = T - P - G, >= 1
    allow_extension: bool | None = None  # None = (P >= 9)
    retrieval_mode: str = "spatial"  # "temporal" is the ablation baseline
    direction_weight: float = 1.0

    def __post_init__(self):
        if self.context_window < 3:
            raise PlanError("context_window must be >= 3")
        if self.strategy not in STRATEGIES:
            raise PlanError(f"unknown strategy {self.strategy!r}")
        if not 1.0 <= self.cfg_scale <= 10.0:
            raise PlanError("cfg_scale must be within [1, 10]")
        if self.retrieval_mode not in ("spatial", "temporal"):
            raise PlanError(f"unknown retrieval_mode {self.retrieval_mode!r}")
        if self.anchors_per_pass is not None and self.anchors_per_pass < 1:
            raise PlanError("anchors_per_pass must be positive")
        if self.retrieval_count is not None and self.retrieval_count < 1:
            raise PlanError("retrieval_count must be positive")


@dataclass(frozen=True)
class FrameRef:
    """Reference to a frame slot: input(i), anchor(j), target(k), or the
    pad token repeating the first input image."""

    source: str
    index: int | None = None

    def __post_init__(self):
        if self.source not in ("input", "anchor", "target", PAD):
            raise PlanError(f"unknown frame source {self.source!r}")
        if self.source != PAD and (self.index is None or self.index < 0):
            raise PlanError(f"{self.source} reference needs a non-negative index")


def input_ref(i: int) -> FrameRef:
    return FrameRef("input", i)


def anchor_ref(j: int) -> FrameRef:
    return FrameRef("anchor", j)


def target_ref(k: int) -> FrameRef:
    return FrameRef("target", k)


@dataclass(frozen=True)
class ForwardPass:
    id: int
    kind: str  # one_pass | anchor_pass | chunk_pass
    conditioning: tuple[FrameRef, ...]
    generation: tuple[FrameRef, ...]
    ordered: bool
    extended: bool
    deps: tuple[int, ...]
    seed: int
    cfg_scale: float

    def __post_init__(self):
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        object.__setattr__(self, "generation", tuple(self.generation))
        object.__setattr__(self, "deps", tuple(self.deps))
        if not self.generation:
            raise PlanError("forward pass must generate at least one frame")

    @property
    def size(self) -> int:
        return len(self.conditioning) + len(self.generation)


@dataclass(frozen=True)
class SamplingPlan:
    """The full schedule: passes plus the anchor camera table.

    anchor_target_indices[j] is the target index anchor j corresponds to, or
    None for standalone (explicitly supplied) anchors.
    """

    request: ViewRequest
    config: PlannerConfig
    passes: tuple[ForwardPass, ...]
    anchor_cameras: tuple[Camera, ...] = ()
    anchor_target_indices: tuple[int | None, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "passes", tuple(self.passes))
        object.__setattr__(self, "anchor_cameras", tuple(self.anchor_cameras))
        object.__setattr__(self, "anchor_target_indices",
                           tuple(self.anchor_target_indices))


class MemoryBank:
    """Spatial index of generated anchors: (descriptor, handle) entries with
    k-nearest lookup by Euclidean descriptor distance."""

    def __init__(self):
        self._descriptors: list[np.ndarray] = []
        self._handles: list[int] = []

    def __len__(self) -> int:
        return len(self._handles)

    @property
    def handles(self) -> list[int]:
        return list(self._handles)

    def add(self, descriptor: np.ndarray, handle: int) -> None:
        self._descriptors.append(np.asarray(descriptor, dtype=np.float64))
        self._handles.append(handle)

    def query(self, descriptors: np.ndarray, count: int) -> list[int]:
        """Handles of the `count` entries nearest (by mean distance) to the
        query descriptor set; ties resolve to earlier insertions."""
        if not self._handles or count < 1:
            return []
        q = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        bank = np.stack(self._descriptors)
        dist = np.linalg.norm(bank[:, None, :] - q[None, :, :], axis=-1).mean(axis=1)
        order = np.argsort(dist, kind="stable")[:count]
        return [self._handles[i] for i in order]

    def query_temporal(self, count: int) -> list[int]:
        """The most recently inserted `count` handles (ablation retrieval)."""
        if count < 1:
            return []
        return self._handles[-count:]


def compute_stride(Q: int, T: int, P: int = 0, use_gt: bool = False) -> int:
    """Anchor stride along the target path, clamped to at least 1."""
    if Q < 1:
        raise PlanError("Q must be positive")
    if T < 3:
        raise PlanError("context_window must be >= 3")
    if use_gt:
        if P >= T - 2:
            raise PlanError("inputs exhaust window")
        return max(1, Q // (T - P - 2))
    return max(1, Q // (T - 2))


def select_anchor_indices(Q: int, stride: int) -> list[int]:
    """Target indices {0, stride, 2*stride, ...} with Q-1 appended."""
    if stride < 1:
        raise PlanError("stride must be >= 1")
    indices = list(range(0, Q, stride))
    if indices[-1] != Q - 1:
        indices.append(Q - 1)
    return indices


def _uniform_subset(indices: list[int], count: int) -> list[int]:
    """Deterministic uniform subsample preserving both endpoints."""
    if count >= len(indices):
        return list(indices)
    picks = np.unique(np.round(np.linspace(0, len(indices) - 1, count)).astype(int))
    return [indices[i] for i in picks]


def assign_nearest_chunks(targets: list[Camera], anchors: list[Camera],
                          direction_weight: float = 1.0) -> dict[int, list[int]]:
    """Assign each target to its nearest anchor by descriptor distance.

    Ties break to the lower anchor index. Every anchor index appears as a key
    (possibly with an empty list).
    """
    if not anchors:
        raise PlanError("anchors must be non-empty")
    out: dict[int, list[int]] = {j: [] for j in range(len(anchors))}
    if not targets:
        return out
    tdesc = np.stack([camera_descriptor(c, direction_weight) for c in targets])
    adesc = np.stack([camera_descriptor(c, direction_weight) for c in anchors])
    dist = np.linalg.norm(tdesc[:, None, :] - adesc[None, :, :], axis=-1)
    nearest = np.argmin(dist, axis=1)  # first minimum = lowest anchor index
    for k, j in enumerate(nearest):
        out[int(j)].append(k)
    return out


def _resolve_strategy(config: PlannerConfig, task: str) -> str:
    if config.strategy != "auto":
        return config.strategy
    return "gt_nearest" if task == "set" else "interp"


def _allow_extension(config: PlannerConfig, P: int) -> bool:
    if config.allow_extension is not None:
        return config.allow_extension
    return P >= 9


def _bank_group_size(config: PlannerConfig, T: int, P: int) -> int:
    if config.anchors_per_pass is not None:
        return config.anchors_per_pass
    return max(1, min(T // 2, T - P - 1))


def _bank_retrieval_count(config: PlannerConfig, T: int, P: int, G: int) -> int:
    if config.retrieval_count is not None:
        return config.retrieval_count
    return max(1, T - P - G)


class _Builder:
    """Accumulates passes with sequential ids and config-derived seeds."""

    def __init__(self, request: ViewRequest, config: PlannerConfig, T: int):
        self.request = request
        self.config = config
        self.T = T
        self.passes: list[ForwardPass] = []

    def add(self, kind: str, conditioning: list[FrameRef], generation: list[FrameRef],
            ordered: bool, deps: list[int], allow_extension: bool) -> ForwardPass:
        size = len(conditioning) + len(generation)
        extended = size > self.T
        if extended and not allow_extension:
            raise PlanError("pass exceeds context window and extension is disabled")
        if not extended and size < self.T:
            pad_ref = conditioning[0] if kind != "one_pass" else FrameRef(PAD)
            conditioning = list(conditioning) + [pad_ref] * (self.T - size)
        fp = ForwardPass(id=len(self.passes), kind=kind,
                         conditioning=tuple(conditioning), generation=tuple(generation),
                         ordered=ordered, extended=extended, deps=tuple(sorted(set(deps))),
                         seed=self.config.seed + len(self.passes),
                         cfg_scale=self.config.cfg_scale)
        self.passes.append(fp)
        return fp


def plan_memory_bank_anchors(anchor_cameras: list[Camera], config: PlannerConfig,
                             input_cameras: list[Camera], *,
                             anchor_target_indices: list[int | None] | None = None,
                             ordered: bool = True,
                             builder: _Builder | None = None) -> list[ForwardPass]:
    """Autoregressive anchor generation in path order.

    Anchors are partitioned into sequential groups of at most G; each pass
    conditions on all inputs plus the R bank entries nearest (mean descriptor
    distance, or most recent in the temporal ablation) to the group being
    generated, and depends on the previous anchor pass. When everything fits
    one pass, that single padded pass is returned.
    """
    P = len(input_cameras)
    A = len(anchor_cameras)
    T = config.context_window
    if builder is None:
        request = ViewRequest(tuple(input_cameras), tuple(anchor_cameras),
                              task="trajectory" if ordered else "set",
                              ordered_targets=ordered)
        builder = _Builder(request, config, T)
    allow_ext = _allow_extension(config, P)
    if anchor_target_indices is None:
        anchor_target_indices = [None] * A

    def gen_ref(j: int) -> FrameRef:
        t = anchor_target_indices[j]
        return anchor_ref(j) if t is None else target_ref(t)

    inputs = [input_ref(i) for i in range(P)]

    if P + A <= T:
        fp = builder.add("anchor_pass", inputs, [gen_ref(j) for j in range(A)],
                         ordered=ordered, deps=[], allow_extension=allow_ext)
        return [fp]

    G = _bank_group_size(config, T, P)
    R = _bank_retrieval_count(config, T, P, G)
    if P + G + R > T and not allow_ext:
        raise PlanError("memory bank passes do not fit the context window "
                        f"(P={P} + G={G} + R={R} > T={T})")

    weight = config.direction_weight
    descriptors = [camera_descriptor(c, weight) for c in anchor_cameras]
    bank = MemoryBank()
    out: list[ForwardPass] = []
    prev_id: int | None = None
    for start in range(0, A, G):
        group = list(range(start, min(start + G, A)))
        if prev_id is None:
            retrieved: list[int] = []
        elif config.retrieval_mode == "temporal":
            retrieved = bank.query_temporal(R)
        else:
            retrieved = bank.query(np.stack([descriptors[j] for j in group]), R)
        cond = inputs + [anchor_ref(j) for j in retrieved]
        deps = [] if prev_id is None else [prev_id]
        fp = builder.add("anchor_pass", cond, [gen_ref(j) for j in group],
                         ordered=ordered, deps=deps, allow_extension=allow_ext)
        out.append(fp)
        prev_id = fp.id
        for j in group:
            bank.add(descriptors[j], j)
    return out


def _anchor_producers(passes: list[ForwardPass],
                      anchor_target_indices: tuple[int | None, ...]) -> dict[int, int]:
    """Map anchor index -> id of the pass that generates it."""
    target_to_anchor = {t: j for j, t in enumerate(anchor_target_indices) if t is not None}
    producers: dict[int, int] = {}
    for fp in passes:
        for ref in fp.generation:
            if ref.source == "anchor":
                producers[ref.index] = fp.id
            elif ref.source == "target" and ref.index in target_to_anchor:
                producers[target_to_anchor[ref.index]] = fp.id
    return producers


def _chunked(seq: list[int], size: int) -> list[list[int]]:
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def make_plan(request: ViewRequest, config: PlannerConfig,
              anchor_cameras: list[Camera] | None = None) -> SamplingPlan:
    """Build the sampling plan for a request. See the module docstring for the
    dispatch rules; `anchor_cameras` supplies an explicit anchor trajectory
    for the nearest strategies (trajectory priors are never guessed)."""
    T = config.context_window
    P = len(request.input_cameras)
    Q = len(request.target_cameras)
    strategy = _resolve_strategy(config, request.task)
    allow_ext = _allow_extension(config, P)
    builder = _Builder(request, config, T)
    inputs = [input_ref(i) for i in range(P)]

    if P + Q <= T:
        builder.add("one_pass", inputs, [target_ref(k) for k in range(Q)],
                    ordered=request.ordered_targets, deps=[], allow_extension=allow_ext)
        return SamplingPlan(request, config, builder.passes)

    if strategy == "one_pass":
        cap = T - P
        if cap < 1:
            if not allow_ext:
                raise PlanError("inputs exhaust window; enable extension or raise T")
            cap = max(1, T - 2)
        for chunk in _chunked(list(range(Q)), cap):
            builder.add("one_pass", inputs, [target_ref(k) for k in chunk],
                        ordered=request.ordered_targets, deps=[], allow_extension=allow_ext)
        return SamplingPlan(request, config, builder.passes)

    if strategy in ("interp", "gt_interp"):
        return _plan_interp(builder, request, config, strategy, allow_ext,
                            anchor_cameras)
    return _plan_nearest(builder, request, config, strategy, allow_ext, anchor_cameras)


def _first_pass_anchor_layout(builder: _Builder, config: PlannerConfig,
                              anchor_cams: list[Camera],
                              anchor_targets: list[int | None],
                              allow_ext: bool, ordered: bool,
                              stride_was_capped: bool,
                              request: ViewRequest) -> tuple[list[Camera], list[int | None], list[ForwardPass]]:
    """Emit the anchor pass(es), degrading gracefully when anchors overflow.

    Overflow resolution order: zero-shot extension when allowed; memory-bank
    autoregression when the stride had to be capped (long paths) or anchors
    are standalone; otherwise the anchor set is thinned to the window.
    """
    T = builder.T
    P = len(request.input_cameras)
    A = len(anchor_cams)
    capacity = T - P
    standalone = any(t is None for t in anchor_targets)

    if A <= capacity or allow_ext:
        # Fits, or extends zero-shot: single anchor pass either way.
        refs = [anchor_ref(j) if t is None else target_ref(t)
                for j, t in enumerate(anchor_targets)]
        fp = builder.add("anchor_pass", [input_ref(i) for i in range(P)], refs,
                         ordered=ordered, deps=[], allow_extension=allow_ext)
        return anchor_cams, anchor_targets, [fp]

    if stride_was_capped or standalone:
        if capacity < 2:
            raise PlanError("inputs exhaust window; enable extension or raise T")
        passes = plan_memory_bank_anchors(
            anchor_cams, config, list(request.input_cameras),
            anchor_target_indices=anchor_targets, ordered=ordered, builder=builder)
        return anchor_cams, anchor_targets, passes

    # Moderate overflow from the floor-division stride: thin to the window.
    if capacity < 2:
        raise PlanError("inputs exhaust window; enable extension or raise T")
    keep = _uniform_subset(list(range(A)), capacity)
    thin_cams = [anchor_cams[i] for i in keep]
    thin_targets = [anchor_targets[i] for i in keep]
    refs = [anchor_ref(j) if t is None else target_ref(t)
            for j, t in enumerate(thin_targets)]
    fp = builder.add("anchor_pass", [input_ref(i) for i in range(P)], refs,
                     ordered=ordered, deps=[], allow_extension=allow_ext)
    return thin_cams, thin_targets, [fp]


def _plan_interp(builder: _Builder, request: ViewRequest, config: PlannerConfig,
                 strategy: str, allow_ext: bool,
                 anchor_cameras: list[Camera] | None) -> SamplingPlan:
    if anchor_cameras is not None:
        raise PlanError("interp strategies derive anchors from the target path")
    T = builder.T
    P = len(request.input_cameras)
    Q = len(request.target_cameras)
    use_gt = strategy == "gt_interp"
    if use_gt and P >= T - 2:
        raise PlanError("inputs exhaust window")

    stride = compute_stride(Q, T, P, use_gt=use_gt)
    seg_overhead = 2 + (P if use_gt else 0)
    stride_cap = max(1, T - seg_overhead + 1)
    capped = stride > stride_cap
    stride = min(stride, stride_cap)
    anchor_idx = select_anchor_indices(Q, stride)
    anchor_cams = [request.target_cameras[k] for k in anchor_idx]
    anchor_targets: list[int | None] = list(anchor_idx)

    anchor_cams, anchor_targets, anchor_passes = _first_pass_anchor_layout(
        builder, config, anchor_cams, anchor_targets, allow_ext,
        ordered=request.ordered_targets, stride_was_capped=capped, request=request)
    producers = _anchor_producers(builder.passes, tuple(anchor_targets))

    chunk_cap = max(1, T - seg_overhead)
    kept_idx = [t for t in anchor_targets if t is not None]
    for j in range(len(kept_idx) - 1):
        lo, hi = kept_idx[j], kept_idx[j + 1]
        interior = list(range(lo + 1, hi))
        if not interior:
            continue
        cond = [anchor_ref(j), anchor_ref(j + 1)]
        if use_gt:
            cond = cond + [input_ref(i) for i in range(P)]
        deps = [producers[j], producers[j + 1]]
        for sub in _chunked(interior, chunk_cap):
            builder.add("chunk_pass", cond, [target_ref(k) for k in sub],
                        ordered=True, deps=deps, allow_extension=allow_ext)
    return SamplingPlan(request, config, builder.passes,
                        anchor_cameras=tuple(anchor_cams),
                        anchor_target_indices=tuple(anchor_targets))


def _plan_nearest(builder: _Builder, request: ViewRequest, config: PlannerConfig,
                  strategy: str, allow_ext: bool,
                  anchor_cameras: list[Camera] | None) -> SamplingPlan:
    T = builder.T
    P = len(request.input_cameras)
    Q = len(request.target_cameras)
    use_gt = strategy == "gt_nearest"

    if anchor_cameras is not None:
        anchor_cams = list(anchor_cameras)
        anchor_targets: list[int | None] = [None] * len(anchor_cams)
    else:
        # No trajectory prior supplied: sample the anchor set uniformly from
        # the targets themselves.
        want = max(1, min(Q, T - 2))
        picks = _uniform_subset(list(range(Q)), want)
        anchor_cams = [request.target_cameras[k] for k in picks]
        anchor_targets = list(picks)

    anchor_cams, anchor_targets, anchor_passes = _first_pass_anchor_layout(
        builder, config, anchor_cams, anchor_targets, allow_ext,
        ordered=request.ordered_targets, stride_was_capped=False, request=request)
    producers = _anchor_producers(builder.passes, tuple(anchor_targets))

    anchored_targets = {t for t in anchor_targets if t is not None}
    remaining = [k for k in range(Q) if k not in anchored_targets]
    chunk_overhead = 1 + (P if use_gt else 0)
    chunk_cap = T - chunk_overhead
    if chunk_cap < 1:
        if not allow_ext:
            raise PlanError("inputs exhaust window; enable extension or raise T")
        chunk_cap = max(1, T - 2)

    if remaining:
        assignment = assign_nearest_chunks([request.target_cameras[k] for k in remaining],
                                           anchor_cams, config.direction_weight)
        for j in sorted(assignment):
            members = [remaining[i] for i in assignment[j]]
            if not members:
                continue
            cond = [anchor_ref(j)]
            if use_gt:
                cond = cond + [input_ref(i) for i in range(P)]
            for sub in _chunked(members, chunk_cap):
                builder.add("chunk_pass", cond, [target_ref(k) for k in sub],
                            ordered=False, deps=[producers[j]],
                            allow_extension=allow_ext)
    return SamplingPlan(request, config, builder.passes,
                        anchor_cameras=tuple(anchor_cams),
                        anchor_target_indices=tuple(anchor_targets))


def validate_plan(plan: SamplingPlan) -> list[str]:
    """Check every SamplingPlan invariant; an empty list means valid."""
    violations: list[str] = []
    T = plan.config.context_window
    Q = len(plan.request.target_cameras)
    P = len(plan.request.input_cameras)
    ids = [fp.id for fp in plan.passes]
    if len(set(ids)) != len(ids):
        violations.append("duplicate pass ids")
    by_id = {fp.id: fp for fp in plan.passes}

    # Exactly-once target coverage.
    target_to_anchor = {t: j for j, t in enumerate(plan.anchor_target_indices)
                        if t is not None}
    seen: dict[int, int] = {}
    for fp in plan.passes:
        if not fp.generation:
            violations.append(f"pass {fp.id}: empty generation")
        for ref in fp.generation:
            if ref.source == "target":
                seen[ref.index] = seen.get(ref.index, 0) + 1
                if ref.index >= Q:
                    violations.append(f"pass {fp.id}: target index {ref.index} out of range")
            elif ref.source == "anchor":
                if ref.index >= len(plan.anchor_cameras):
                    violations.append(f"pass {fp.id}: anchor index {ref.index} out of range")
            else:
                violations.append(f"pass {fp.id}: generation ref {ref.source} not allowed")
    for k in range(Q):
        n = seen.get(k, 0)
        if n == 0:
            violations.append(f"target {k} not generated by any pass")
        elif n > 1:
            violations.append(f"duplicate target {k} generated by {n} passes")

    # Window discipline.
    for fp in plan.passes:
        if not fp.extended and fp.size != T:
            violations.append(f"pass {fp.id}: size {fp.size} != context window {T}")
        for ref in fp.conditioning:
            if ref.source == "input" and ref.index >= P:
                violations.append(f"pass {fp.id}: input index {ref.index} out of range")

    # Dependency DAG (deps exist, acyclic).
    for fp in plan.passes:
        for d in fp.deps:
            if d not in by_id:
                violations.append(f"pass {fp.id}: unknown dependency {d}")
    state: dict[int, int] = {}

    def has_cycle(i: int) -> bool:
        state[i] = 1
        for d in by_id[i].deps:
            if d not in by_id:
                continue
            s = state.get(d, 0)
            if s == 1 or (s == 0 and has_cycle(d)):
                return True
        state[i] = 2
        return False

    for i in by_id:
        if state.get(i, 0) == 0 and has_cycle(i):
            violations.append("dependency cycle detected")
            break

    # Anchor availability: conditioning anchors must be produced by a
    # (transitive) dependency of the consuming pass.
    producers = _anchor_producers(list(plan.passes), plan.anchor_target_indices)

    def dep_closure(i: int) -> set[int]:
        out: set[int] = set()
        stack = list(by_id[i].deps)
        while stack:
            d = stack.pop()
            if d in out or d not in by_id:
                continue
            out.add(d)
            stack.extend(by_id[d].deps)
        return out

    for fp in plan.passes:
        closure: set[int] | None = None
        for ref in fp.conditioning:
            if ref.source != "anchor":
                continue
            producer = producers.get(ref.index)
            if producer is None:
                violations.append(f"pass {fp.id}: anchor {ref.index} is never generated")
                continue
            if closure is None:
                closure = dep_closure(fp.id)
            if producer not in closure:
                violations.append(
                    f"pass {fp.id}: dependency order violation for anchor {ref.index}")
    return violations
