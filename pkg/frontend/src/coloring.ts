// Derived views of a PlanFile for display: frame ownership, anchor roles,
// and graph edges. These are lookups over the server's plan, never a
// re-computation of it.

import type { PlanFile } from "./types";

/** target index -> id of the pass that generates it. */
export function targetPassMap(plan: PlanFile): Map<number, number> {
  const out = new Map<number, number>();
  for (const pass of plan.passes) {
    for (const ref of pass.gen) {
      if (ref.source === "target" && ref.index !== null) {
        out.set(ref.index, pass.id);
      }
    }
  }
  return out;
}

/** anchor index -> id of the pass that generates it. */
export function anchorProducers(plan: PlanFile): Map<number, number> {
  const byTarget = new Map<number, number>();
  plan.anchor_target_indices.forEach((t, j) => {
    if (t !== null) byTarget.set(t, j);
  });
  const out = new Map<number, number>();
  for (const pass of plan.passes) {
    for (const ref of pass.gen) {
      if (ref.source === "anchor" && ref.index !== null) {
        out.set(ref.index, pass.id);
      } else if (ref.source === "target" && ref.index !== null) {
        const j = byTarget.get(ref.index);
        if (j !== undefined) out.set(j, pass.id);
      }
    }
  }
  return out;
}

/** Target indices that double as anchors. */
export function anchorTargets(plan: PlanFile): Set<number> {
  const out = new Set<number>();
  for (const t of plan.anchor_target_indices) {
    if (t !== null) out.add(t);
  }
  return out;
}

export function passColor(passId: number, passCount: number): string {
  const hue = Math.round((360 * passId) / Math.max(passCount, 1));
  return `hsl(${hue} 70% 55%)`;
}

export interface DependencyEdge {
  from: number; // pass id
  to: number; // pass id
}

export function dependencyEdges(plan: PlanFile): DependencyEdge[] {
  const edges: DependencyEdge[] = [];
  for (const pass of plan.passes) {
    for (const dep of pass.deps) edges.push({ from: dep, to: pass.id });
  }
  return edges;
}

export interface RetrievalEdge {
  fromAnchor: number; // bank anchor supplying conditioning
  toPass: number; // anchor pass consuming it
}

/** Memory-bank lookups: anchors conditioning later anchor passes. */
export function retrievalEdges(plan: PlanFile): RetrievalEdge[] {
  const edges: RetrievalEdge[] = [];
  for (const pass of plan.passes) {
    if (pass.kind !== "anchor_pass") continue;
    const seen = new Set<number>();
    for (const ref of pass.cond) {
      if (ref.source === "anchor" && ref.index !== null && !seen.has(ref.index)) {
        seen.add(ref.index);
        edges.push({ fromAnchor: ref.index, toPass: pass.id });
      }
    }
  }
  return edges;
}

/** True when the pass sequence contains a sequential anchor chain. */
export function hasAnchorChain(plan: PlanFile): boolean {
  const anchorPasses = plan.passes.filter((p) => p.kind === "anchor_pass");
  if (anchorPasses.length < 2) return false;
  return anchorPasses
    .slice(1)
    .every((p, i) => p.deps.includes(anchorPasses[i].id));
}
