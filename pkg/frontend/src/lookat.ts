// Camera placement helper matching the workbench pose convention
// (camera-to-world, x-right / y-down / z-forward, world up +z).

import type { CameraDict, IntrinsicsDict, Vec3 } from "./types";

function sub(a: Vec3, b: Vec3): Vec3 {
  return { x: a.x - b.x, y: a.y - b.y, z: a.z - b.z };
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return {
    x: a.y * b.z - a.z * b.y,
    y: a.z * b.x - a.x * b.z,
    z: a.x * b.y - a.y * b.x,
  };
}

function norm(a: Vec3): number {
  return Math.hypot(a.x, a.y, a.z);
}

function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n < 1e-12) throw new Error("cannot normalize zero vector");
  return { x: a.x / n, y: a.y / n, z: a.z / n };
}

export function lookAtPose(eye: Vec3, target: Vec3): number[] {
  const fwd = normalize(sub(target, eye));
  let up: Vec3 = { x: 0, y: 0, z: 1 };
  if (norm(cross(fwd, up)) < 1e-6) up = { x: 0, y: 1, z: 0 };
  const xAxis = normalize(cross(fwd, up));
  const yAxis = normalize(cross(fwd, xAxis));
  // JSON has no negative zero; normalize so export/import is an identity.
  const z = (v: number) => (v === 0 ? 0 : v);
  return [
    xAxis.x, yAxis.x, fwd.x, eye.x,
    xAxis.y, yAxis.y, fwd.y, eye.y,
    xAxis.z, yAxis.z, fwd.z, eye.z,
    0, 0, 0, 1,
  ].map(z);
}

export function lookAtCamera(
  eye: Vec3,
  target: Vec3,
  intrinsics: IntrinsicsDict,
): CameraDict {
  return { pose: lookAtPose(eye, target), intrinsics };
}
