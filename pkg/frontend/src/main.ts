// Browser bootstrap: connect to the workbench service, seed an orbit, and
// wire the control panel.

import { WorkbenchClient } from "./api";
import { DesignerApp } from "./ui";

const SERVER = (window as any).VCAM_SERVER ?? "http://127.0.0.1:8080";

async function boot(): Promise<void> {
  const client = new WorkbenchClient(SERVER);
  await client.health();
  const trajectory = await client.trajectoryPreset("orbit", {
    radius: 2.0,
    frame_count: 60,
    elevation: 0.3,
  });
  const root = document.getElementById("designer")!;
  const app = new DesignerApp(root, client, trajectory, { sceneSeed: 7 });

  const controls = document.getElementById("controls")!;
  const strategy = controls.querySelector<HTMLSelectElement>("#strategy")!;
  strategy.addEventListener("change", () => app.setStrategy(strategy.value));
  const context = controls.querySelector<HTMLInputElement>("#context")!;
  context.addEventListener("change", () =>
    app.setPlannerConfig({ context_window: Number(context.value) }));
  const seed = controls.querySelector<HTMLInputElement>("#seed")!;
  seed.addEventListener("change", () =>
    app.setPlannerConfig({ seed: Number(seed.value) }));
  const cfg = controls.querySelector<HTMLInputElement>("#cfg")!;
  cfg.addEventListener("change", () =>
    app.setPlannerConfig({ cfg_scale: Number(cfg.value) }));
  const task = controls.querySelector<HTMLSelectElement>("#task")!;
  task.addEventListener("change", () =>
    app.setTask(task.value as "trajectory" | "set"));

  controls.querySelector("#preview")!.addEventListener("click", () => {
    void app.previewPath();
  });
  controls.querySelector("#export")!.addEventListener("click", () => {
    const blob = new Blob([app.exportFile()], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "trajectory.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });
  const importInput = controls.querySelector<HTMLInputElement>("#import")!;
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    if (file) app.importFile(await file.text());
  });
  controls.querySelector("#add-keyframe")!.addEventListener("click", () => {
    const n = app.state.trajectory.frames.length;
    const angle = (2 * Math.PI * n) / 24;
    app.addKeyframeAt({ x: 2 * Math.cos(angle), y: 2 * Math.sin(angle), z: 0.6 });
  });
}

boot().catch((err) => {
  const root = document.getElementById("designer");
  if (root) root.textContent = `failed to reach workbench service: ${err}`;
});
