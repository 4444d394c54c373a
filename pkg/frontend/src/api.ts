// Thin fetch client for the workbench HTTP API. All planning and rendering
// stays server-side; this file is the only network surface.

import type {
  CameraDict,
  IntrinsicsDict,
  PlanFile,
  PlannerConfigDict,
  PresetDescriptor,
  Task,
  TrajectoryFile,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, error: string, detail: string) {
    super(`${error}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

async function readJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.error ?? "error",
      body.detail ?? response.statusText);
  }
  return body;
}

export class WorkbenchClient {
  constructor(readonly baseUrl: string) {}

  private async post(path: string, body: unknown, signal?: AbortSignal): Promise<any> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    return readJson(response);
  }

  async health(): Promise<{ status: string }> {
    return readJson(await fetch(this.baseUrl + "/api/health"));
  }

  async presets(): Promise<PresetDescriptor[]> {
    const body = await readJson(await fetch(this.baseUrl + "/api/presets"));
    return body.presets;
  }

  async trajectoryPreset(
    kind: string,
    params: Record<string, unknown>,
    options: { intrinsics?: IntrinsicsDict; inputCount?: number } = {},
  ): Promise<TrajectoryFile> {
    return this.post("/api/trajectory/preset", {
      kind,
      params,
      intrinsics: options.intrinsics,
      input_count: options.inputCount ?? 1,
    });
  }

  async plan(
    trajectory: TrajectoryFile,
    config: PlannerConfigDict,
    task: Task,
    signal?: AbortSignal,
  ): Promise<PlanFile> {
    return this.post("/api/plan", { trajectory, config, task }, signal);
  }

  async preview(
    cameras: CameraDict[],
    options: { sceneSeed?: number; maxDim?: number } = {},
    signal?: AbortSignal,
  ): Promise<string[]> {
    const body = await this.post("/api/preview", {
      cameras,
      scene_seed: options.sceneSeed,
      max_dim: options.maxDim ?? 48,
    }, signal);
    return body.frames;
  }

  async run(plan: PlanFile, sceneSeed?: number): Promise<{
    frames: Record<string, string>;
    anchor_frames: Record<string, string>;
    metrics: Record<string, number | null>;
  }> {
    return this.post("/api/run", { plan, scene_seed: sceneSeed });
  }
}
