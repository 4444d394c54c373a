// Wire types mirroring the workbench JSON formats.

export interface IntrinsicsDict {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface CameraDict {
  pose: number[]; // 16 values, 4x4 row-major camera-to-world
  intrinsics: IntrinsicsDict;
}

export type FrameRole = "input" | "target";

export interface TrajectoryFrame extends CameraDict {
  role: FrameRole;
}

export interface TrajectoryFile {
  version: number;
  convention: string;
  frames: TrajectoryFrame[];
}

export const TRAJECTORY_CONVENTION =
  "camera_to_world;x_right;y_down;z_forward;row_major";

export type FrameSource = "input" | "anchor" | "target" | "pad_repeat_first_input";

export interface FrameRefDict {
  source: FrameSource;
  index: number | null;
}

export interface PassDict {
  id: number;
  kind: "one_pass" | "anchor_pass" | "chunk_pass";
  ordered: boolean;
  extended: boolean;
  cond: FrameRefDict[];
  gen: FrameRefDict[];
  deps: number[];
  seed: number;
  cfg_scale: number;
}

export interface PlanRequestDict {
  input_cameras: CameraDict[];
  target_cameras: CameraDict[];
  task: string;
  ordered_targets: boolean;
}

export interface PlannerConfigDict {
  context_window: number;
  strategy: string;
  cfg_scale: number;
  seed: number;
  anchors_per_pass?: number | null;
  retrieval_count?: number | null;
  allow_extension?: boolean | null;
  retrieval_mode?: string;
  direction_weight?: number;
}

export interface PlanFile {
  version: number;
  request: PlanRequestDict;
  config: PlannerConfigDict;
  passes: PassDict[];
  anchor_cameras: CameraDict[];
  anchor_target_indices: (number | null)[];
}

export interface PresetDescriptor {
  kind: string;
  params: Record<string, { type: string; default: unknown }>;
}

export type Task = "trajectory" | "set";

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export function cameraPosition(camera: CameraDict): Vec3 {
  return { x: camera.pose[3], y: camera.pose[7], z: camera.pose[11] };
}

export function cameraForward(camera: CameraDict): Vec3 {
  // Third rotation column: the +z view axis in world coordinates.
  return { x: camera.pose[2], y: camera.pose[6], z: camera.pose[10] };
}
