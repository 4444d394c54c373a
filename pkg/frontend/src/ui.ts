// The designer controller: owns the session state, schedules server-side
// re-planning on every edit, and keeps the DOM in sync. The plan view is
// gated by the dirty flag so it is never stale relative to the trajectory;
// per-frame pass attributes are only present when the displayed plan matches
// the edited trajectory.

import { WorkbenchClient } from "./api";
import {
  anchorTargets,
  dependencyEdges,
  hasAnchorChain,
  passColor,
  retrievalEdges,
  targetPassMap,
} from "./coloring";
import { lookAtCamera } from "./lookat";
import {
  PlanScheduler,
  SessionState,
  Selection,
  addKeyframe,
  applyPlan,
  applyPlanError,
  createSession,
  deleteKeyframe,
  exportTrajectory,
  importTrajectory,
  moveKeyframe,
  select,
  setConfig,
  setTask,
  setTrajectory,
} from "./state";
import type {
  IntrinsicsDict,
  PlanFile,
  PlannerConfigDict,
  Task,
  TrajectoryFile,
  Vec3,
} from "./types";
import { drawViewport } from "./viewport";

const DEFAULT_INTRINSICS: IntrinsicsDict = {
  fx: 64, fy: 64, cx: 32, cy: 32, width: 64, height: 64,
};

export interface DesignerOptions {
  debounceMs?: number;
  sceneSeed?: number;
  previewEvery?: number; // subsample stride for path thumbnails
  drawViewport?: boolean; // disable under DOM-only test environments
}

export class DesignerApp {
  state: SessionState;
  readonly client: WorkbenchClient;
  private readonly scheduler: PlanScheduler;
  private readonly doc: Document;
  private readonly strip: HTMLElement;
  private readonly graph: HTMLElement;
  private readonly timeline: HTMLElement;
  private readonly scrub: HTMLInputElement;
  private readonly toast: HTMLElement;
  private readonly canvas: HTMLCanvasElement;
  private readonly sceneSeed: number;
  private readonly previewEvery: number;
  private planWaiters: Array<(plan: PlanFile) => void> = [];
  private errorWaiters: Array<(detail: string) => void> = [];
  private thumbnailRevision = -1;
  private readonly viewportEnabled: boolean;

  constructor(
    readonly root: HTMLElement,
    client: WorkbenchClient,
    trajectory: TrajectoryFile,
    options: DesignerOptions = {},
  ) {
    this.client = client;
    this.doc = root.ownerDocument;
    this.sceneSeed = options.sceneSeed ?? 0;
    this.previewEvery = options.previewEvery ?? 4;
    this.viewportEnabled = options.drawViewport ?? true;
    this.scheduler = new PlanScheduler(client, options.debounceMs ?? 200);
    this.state = createSession(trajectory);

    root.innerHTML = "";
    this.canvas = this.doc.createElement("canvas");
    this.canvas.width = 560;
    this.canvas.height = 420;
    this.canvas.className = "viewport";
    this.strip = this.el("div", "frame-strip");
    this.graph = this.el("div", "plan-graph");
    this.timeline = this.el("div", "timeline");
    this.scrub = this.doc.createElement("input");
    this.scrub.type = "range";
    this.scrub.min = "0";
    this.scrub.className = "scrub";
    this.scrub.addEventListener("input", () => {
      this.dispatch(select(this.state, {
        kind: "frame",
        index: Number(this.scrub.value),
      }), { replan: false });
    });
    this.toast = this.el("div", "toast");
    for (const node of [this.canvas, this.strip, this.graph, this.timeline,
                        this.scrub, this.toast]) {
      root.appendChild(node);
    }
    this.dispatch(this.state); // kick off the initial plan
  }

  private el(tag: string, className: string): HTMLElement {
    const node = this.doc.createElement(tag);
    node.className = className;
    return node;
  }

  /** Resolves with the next plan the server applies. */
  waitForPlan(): Promise<PlanFile> {
    return new Promise((resolve) => this.planWaiters.push(resolve));
  }

  /** Resolves with the next planning error surfaced inline. */
  waitForPlanError(): Promise<string> {
    return new Promise((resolve) => this.errorWaiters.push(resolve));
  }

  private dispatch(next: SessionState, opts: { replan?: boolean } = {}): void {
    const replan = opts.replan ?? next.planDirty;
    this.state = next;
    this.render();
    if (replan) {
      this.scheduler.schedule(next, (outcome) => {
        if (outcome.plan) {
          this.state = applyPlan(this.state, outcome.plan, outcome.revision);
          if (this.state.planRevision === outcome.revision) {
            const waiters = this.planWaiters;
            this.planWaiters = [];
            waiters.forEach((w) => w(outcome.plan!));
          }
        } else if (outcome.error !== undefined) {
          this.state = applyPlanError(this.state, outcome.error, outcome.revision);
          if (this.state.planError === outcome.error) {
            const waiters = this.errorWaiters;
            this.errorWaiters = [];
            waiters.forEach((w) => w(outcome.error!));
          }
        }
        this.render();
      });
    }
  }

  // -- edit operations ----------------------------------------------------

  async applyPreset(kind: string, params: Record<string, unknown>,
                    inputCount = 1): Promise<void> {
    const trajectory = await this.client.trajectoryPreset(kind, params, {
      intrinsics: DEFAULT_INTRINSICS,
      inputCount,
    });
    this.dispatch(setTrajectory(this.state, trajectory));
  }

  setStrategy(strategy: string): void {
    this.dispatch(setConfig(this.state, { strategy }));
  }

  setPlannerConfig(config: Partial<PlannerConfigDict>): void {
    this.dispatch(setConfig(this.state, config));
  }

  setTask(task: Task): void {
    this.dispatch(setTask(this.state, task));
  }

  addKeyframeAt(eye: Vec3, target: Vec3 = { x: 0, y: 0, z: 0 }): void {
    const intr = this.state.trajectory.frames[0]?.intrinsics ?? DEFAULT_INTRINSICS;
    this.dispatch(addKeyframe(this.state, lookAtCamera(eye, target, intr)));
  }

  moveKeyframeTo(index: number, eye: Vec3, target: Vec3 = { x: 0, y: 0, z: 0 }): void {
    const intr = this.state.trajectory.frames[index].intrinsics;
    this.dispatch(moveKeyframe(this.state, index, lookAtCamera(eye, target, intr)));
  }

  removeKeyframe(index: number): void {
    this.dispatch(deleteKeyframe(this.state, index));
  }

  selectFrame(index: number): void {
    this.dispatch(select(this.state, { kind: "frame", index }), { replan: false });
  }

  scrubTo(index: number): void {
    this.scrub.value = String(index);
    this.selectFrame(index);
  }

  exportFile(): string {
    return exportTrajectory(this.state);
  }

  importFile(text: string): void {
    this.dispatch(setTrajectory(this.state, importTrajectory(text)));
  }

  // -- preview ------------------------------------------------------------

  async previewPath(): Promise<number> {
    const revision = this.state.revision;
    const cameras = this.state.trajectory.frames.filter(
      (_, i) => i % this.previewEvery === 0);
    try {
      const thumbs = await this.client.preview(cameras, {
        sceneSeed: this.sceneSeed,
        maxDim: 48,
      });
      this.timeline.innerHTML = "";
      thumbs.forEach((b64, i) => {
        const img = this.doc.createElement("img");
        img.src = `data:image/png;base64,${b64}`;
        img.setAttribute("data-thumb", String(i));
        this.timeline.appendChild(img);
      });
      this.thumbnailRevision = revision;
      this.timeline.setAttribute(
        "data-stale", String(revision !== this.state.revision));
      return thumbs.length;
    } catch (err) {
      // Network failures surface as a non-blocking toast.
      this.toast.textContent = `preview failed: ${String(err)}`;
      this.toast.setAttribute("data-visible", "true");
      return 0;
    }
  }

  // -- rendering ----------------------------------------------------------

  private render(): void {
    const { state } = this;
    this.root.setAttribute("data-plan-dirty", String(state.planDirty));
    this.root.setAttribute("data-plan-error", state.planError ?? "");
    const targetCount = state.trajectory.frames.filter(
      (f) => f.role === "target").length;
    this.scrub.max = String(Math.max(targetCount - 1, 0));
    if (this.thumbnailRevision >= 0) {
      this.timeline.setAttribute(
        "data-stale", String(this.thumbnailRevision !== state.revision));
    }

    // Frame strip: one cell per target, colored by owning pass. The dirty
    // flag gates the plan attributes so the view is never stale.
    const plan = state.planDirty ? null : state.plan;
    const passMap = plan ? targetPassMap(plan) : null;
    const anchors = plan ? anchorTargets(plan) : new Set<number>();
    const passCount = plan ? plan.passes.length : 1;
    this.strip.innerHTML = "";
    for (let k = 0; k < targetCount; k += 1) {
      const cell = this.el("span", "frame");
      cell.setAttribute("data-frame", String(k));
      if (passMap !== null && passMap.has(k)) {
        const pid = passMap.get(k)!;
        cell.setAttribute("data-pass", String(pid));
        (cell as HTMLElement).style.backgroundColor = passColor(pid, passCount);
      }
      if (anchors.has(k)) cell.setAttribute("data-anchor", "true");
      if (state.selection?.kind === "frame" && state.selection.index === k) {
        cell.setAttribute("data-selected", "true");
      }
      cell.addEventListener("click", () => this.selectFrame(k));
      this.strip.appendChild(cell);
    }

    // Pass graph: nodes plus dependency and retrieval edge lists.
    this.graph.innerHTML = "";
    if (plan) {
      this.graph.setAttribute("data-anchor-chain", String(hasAnchorChain(plan)));
      for (const pass of plan.passes) {
        const node = this.el("div", `pass pass-${pass.kind}`);
        node.setAttribute("data-pass-id", String(pass.id));
        node.setAttribute("data-kind", pass.kind);
        node.setAttribute("data-extended", String(pass.extended));
        node.style.borderColor = passColor(pass.id, passCount);
        node.textContent =
          `#${pass.id} ${pass.kind} (${pass.gen.length} frames)`;
        this.graph.appendChild(node);
      }
      for (const edge of dependencyEdges(plan)) {
        const el = this.el("div", "edge dep-edge");
        el.setAttribute("data-from", String(edge.from));
        el.setAttribute("data-to", String(edge.to));
        this.graph.appendChild(el);
      }
      for (const edge of retrievalEdges(plan)) {
        const el = this.el("div", "edge retrieval-edge");
        el.setAttribute("data-from-anchor", String(edge.fromAnchor));
        el.setAttribute("data-to-pass", String(edge.toPass));
        this.graph.appendChild(el);
      }
    }

    if (this.viewportEnabled) drawViewport(this.canvas, state);
  }

  dispose(): void {
    this.scheduler.cancel();
  }
}
