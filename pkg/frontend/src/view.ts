/**
 * Pure projection of the replica into a containment tree. Compositions
 * nest; every other association is a cross reference. Elements not
 * reachable from a MindMap-typed root carry the dangling flag and render
 * in a separate tray, making tolerated inconsistencies visible.
 */

import { ModelReplica, NAME_KEY, POTENCY_KEY, TYPE_KEY,
         parsePotency } from "./replica.js";
import { cmpText } from "./stamps.js";

export interface ViewRef {
  edgeId: string;
  edgeName: string;
  association: string;
  targetId: string;
  targetName: string;
}

export interface ViewNode {
  id: string;
  name: string;
  typeName: string;
  potency: number;
  attrs: [string, string][];
  children: { edgeName: string; association: string; node: ViewNode }[];
  refs: ViewRef[];
  dangling: boolean;
}

export interface ViewTree {
  roots: ViewNode[];
}

export function buildView(replica: ModelReplica): ViewTree {
  const vertexIds = replica.liveVertexIds();
  const vertexSet = new Set(vertexIds);
  const children = new Map<string, { edgeName: string; association: string;
                                     target: string; edgeId: string }[]>();
  const refs = new Map<string, ViewRef[]>();
  const contained = new Set<string>();

  for (const edgeId of replica.liveEdgeIds()) {
    const map = replica.edgeMaps.get(edgeId)!;
    const ends = replica.edgeEndpoints(edgeId)!;
    if (!vertexSet.has(ends.source)) continue;
    const edgeName = map.query(NAME_KEY) ?? "";
    const association = map.query(TYPE_KEY) ?? "";
    if (replica.effectiveKind(edgeId) === "Composition" &&
        vertexSet.has(ends.target)) {
      let bucket = children.get(ends.source);
      if (!bucket) children.set(ends.source, (bucket = []));
      bucket.push({ edgeName, association, target: ends.target, edgeId });
      contained.add(ends.target);
    } else {
      let bucket = refs.get(ends.source);
      if (!bucket) refs.set(ends.source, (bucket = []));
      bucket.push({ edgeId, edgeName, association, targetId: ends.target,
                    targetName: replica.displayName(ends.target) });
    }
  }

  // Reachability from MindMap-typed roots decides the dangling flag.
  const anchored = new Set<string>();
  const queue = vertexIds.filter(
    (id) => replica.vertexMaps.get(id)!.query(TYPE_KEY) === "MindMap");
  while (queue.length) {
    const id = queue.pop()!;
    if (anchored.has(id)) continue;
    anchored.add(id);
    for (const child of children.get(id) ?? []) queue.push(child.target);
  }

  const byNameThenId = (a: string, b: string) =>
    cmpText(replica.displayName(a), replica.displayName(b)) || cmpText(a, b);

  const printed = new Set<string>();

  function node(id: string): ViewNode {
    printed.add(id);
    const map = replica.vertexMaps.get(id)!;
    const kids = (children.get(id) ?? [])
      .sort((a, b) => cmpText(a.edgeName, b.edgeName) || cmpText(a.edgeId, b.edgeId))
      .filter((c) => !printed.has(c.target))
      .map((c) => ({ edgeName: c.edgeName, association: c.association,
                     node: node(c.target) }));
    return {
      id,
      name: map.query(NAME_KEY) ?? "",
      typeName: map.query(TYPE_KEY) ?? "",
      potency: parsePotency(map.query(POTENCY_KEY)),
      attrs: map.liveItems().filter(([k]) => !k.startsWith("~")),
      children: kids,
      refs: (refs.get(id) ?? []).sort((a, b) => cmpText(a.edgeName, b.edgeName)),
      dangling: !anchored.has(id),
    };
  }

  const rootIds = vertexIds.filter((id) => !contained.has(id))
    .sort(byNameThenId);
  const roots = rootIds.map(node);
  // Containment cycles: anything still unprinted becomes its own root.
  for (const id of vertexIds.sort(byNameThenId)) {
    if (!printed.has(id)) roots.push(node(id));
  }
  return { roots };
}

/** Canonical text form of the tree; converged replicas render equal text. */
export function renderTree(tree: ViewTree): string {
  const lines: string[] = [];
  const emit = (n: ViewNode, depth: number, via: string) => {
    const indent = "  ".repeat(depth);
    const pot = n.potency === Infinity ? "*" : String(n.potency);
    const attrs = n.attrs.length
      ? " {" + n.attrs.map(([k, v]) => `${k}=${v}`).join("; ") + "}"
      : "";
    lines.push(`${indent}${via}${n.name} : ${n.typeName || "Clabject"} ` +
               `(p${pot})${attrs}${n.dangling ? "  [dangling]" : ""}`);
    for (const ref of n.refs) {
      lines.push(`${indent}  -> [${ref.edgeName} : ${ref.association}] ` +
                 ref.targetName);
    }
    for (const child of n.children) {
      emit(child.node, depth + 1, `[${child.edgeName} : ${child.association}] `);
    }
  };
  for (const root of tree.roots) emit(root, 0, "");
  return lines.join("\n");
}
