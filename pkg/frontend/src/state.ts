// Session state and the pure update functions behind the designer. The UI
// never re-implements planner math: every edit marks the plan dirty and the
// scheduler asks the server to re-plan (debounced, latest wins).

import type { WorkbenchClient } from "./api";
import { ApiError } from "./api";
import type {
  CameraDict,
  PlanFile,
  PlannerConfigDict,
  Task,
  TrajectoryFile,
  TrajectoryFrame,
} from "./types";
import { TRAJECTORY_CONVENTION } from "./types";

export type Selection =
  | { kind: "frame"; index: number }
  | { kind: "pass"; id: number }
  | null;

export interface SessionState {
  trajectory: TrajectoryFile;
  config: PlannerConfigDict;
  task: Task;
  plan: PlanFile | null;
  planDirty: boolean;
  /** Monotonic edit counter; a plan only applies if it matches. */
  revision: number;
  planRevision: number;
  planError: string | null;
  selection: Selection;
}

export const DEFAULT_CONFIG: PlannerConfigDict = {
  context_window: 21,
  strategy: "auto",
  cfg_scale: 3.0,
  seed: 0,
  retrieval_mode: "spatial",
};

export function createSession(
  trajectory: TrajectoryFile,
  config: PlannerConfigDict = DEFAULT_CONFIG,
  task: Task = "trajectory",
): SessionState {
  return {
    trajectory,
    config: { ...config },
    task,
    plan: null,
    planDirty: true,
    revision: 0,
    planRevision: -1,
    planError: null,
    selection: null,
  };
}

function touched(state: SessionState, trajectory: TrajectoryFile): SessionState {
  return {
    ...state,
    trajectory,
    planDirty: true,
    revision: state.revision + 1,
    planError: null,
  };
}

export function setTrajectory(state: SessionState, trajectory: TrajectoryFile): SessionState {
  return touched(state, trajectory);
}

export function setConfig(state: SessionState, config: Partial<PlannerConfigDict>): SessionState {
  return {
    ...state,
    config: { ...state.config, ...config },
    planDirty: true,
    revision: state.revision + 1,
    planError: null,
  };
}

export function setTask(state: SessionState, task: Task): SessionState {
  return {
    ...state,
    task,
    planDirty: true,
    revision: state.revision + 1,
    planError: null,
  };
}

export function addKeyframe(state: SessionState, camera: CameraDict,
                            role: TrajectoryFrame["role"] = "target"): SessionState {
  const frames = [...state.trajectory.frames, { ...camera, role }];
  return touched(state, { ...state.trajectory, frames });
}

export function moveKeyframe(state: SessionState, index: number,
                             camera: CameraDict): SessionState {
  const frames = state.trajectory.frames.map((frame, i) =>
    i === index ? { ...camera, role: frame.role } : frame);
  return touched(state, { ...state.trajectory, frames });
}

export function deleteKeyframe(state: SessionState, index: number): SessionState {
  const frames = state.trajectory.frames.filter((_, i) => i !== index);
  if (!frames.some((f) => f.role === "input")) {
    throw new Error("cannot delete the last input frame");
  }
  return touched(state, { ...state.trajectory, frames });
}

export function select(state: SessionState, selection: Selection): SessionState {
  return { ...state, selection };
}

export function applyPlan(state: SessionState, plan: PlanFile,
                          revision: number): SessionState {
  if (revision !== state.revision) return state; // stale response: latest wins
  return { ...state, plan, planDirty: false, planRevision: revision, planError: null };
}

export function applyPlanError(state: SessionState, detail: string,
                               revision: number): SessionState {
  if (revision !== state.revision) return state;
  return { ...state, planError: detail };
}

export function exportTrajectory(state: SessionState): string {
  return JSON.stringify(state.trajectory, null, 2);
}

export function importTrajectory(text: string): TrajectoryFile {
  const body = JSON.parse(text);
  if (body.convention !== TRAJECTORY_CONVENTION) {
    throw new Error(`unsupported convention ${body.convention}`);
  }
  if (!Array.isArray(body.frames) || body.frames.length === 0) {
    throw new Error("trajectory has no frames");
  }
  for (const frame of body.frames) {
    if (!Array.isArray(frame.pose) || frame.pose.length !== 16) {
      throw new Error("frame pose must hold 16 values");
    }
    if (frame.role !== "input" && frame.role !== "target") {
      throw new Error(`bad frame role ${frame.role}`);
    }
  }
  if (!body.frames.some((f: TrajectoryFrame) => f.role === "input")) {
    throw new Error("trajectory needs at least one input frame");
  }
  return body as TrajectoryFile;
}

/** Debounced latest-wins re-planning against the workbench service. */
export class PlanScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;

  constructor(
    private readonly client: WorkbenchClient,
    private readonly debounceMs = 200,
  ) {}

  /**
   * Schedule a re-plan for the given state snapshot. `apply` receives either
   * the plan or the server's error detail, tagged with the snapshot revision
   * so stale responses can be dropped.
   */
  schedule(
    state: SessionState,
    apply: (outcome: { plan?: PlanFile; error?: string; revision: number }) => void,
  ): void {
    if (this.timer !== null) clearTimeout(this.timer);
    const { trajectory, config, task, revision } = state;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.controller?.abort();
      const controller = new AbortController();
      this.controller = controller;
      this.client
        .plan(trajectory, config, task, controller.signal)
        .then((plan) => apply({ plan, revision }))
        .catch((err) => {
          if (controller.signal.aborted) return;
          const detail = err instanceof ApiError ? err.detail : String(err);
          apply({ error: detail, revision });
        });
    }, this.debounceMs);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.controller?.abort();
  }
}
