/**
 * Conformance projection for inline warnings: unresolved types, violated
 * multiplicities, duplicate names, broken potency chains. Reporting only;
 * nothing here ever blocks an edit or a merge.
 */

import { ModelReplica, NAME_KEY, POTENCY_KEY, TYPE_KEY,
         parsePotency } from "./replica.js";

export interface Warning {
  kind: "UnresolvedType" | "MultiplicityViolation" | "AmbiguousName"
    | "PotencyViolation";
  subject: string;
  detail: string;
}

const KIND_NAMES = new Set(["Node", "Model", "Clabject", "Association",
                            "Composition", "Aggregation", "Attribute"]);

export function checkConformance(replica: ModelReplica): Warning[] {
  const warnings: Warning[] = [];
  const vertexIds = replica.liveVertexIds();
  const edgeIds = replica.liveEdgeIds();
  const allIds = [...vertexIds, ...edgeIds];

  const byName = new Map<string, string[]>();
  for (const id of allIds) {
    const name = replica.backing(id)!.query(NAME_KEY);
    if (!name) continue;
    let bucket = byName.get(name);
    if (!bucket) byName.set(name, (bucket = []));
    bucket.push(id);
  }

  for (const id of allIds) {
    const typeName = replica.backing(id)!.query(TYPE_KEY);
    if (!typeName || KIND_NAMES.has(typeName)) continue;
    if (!byName.get(typeName)?.length) {
      warnings.push({
        kind: "UnresolvedType", subject: id,
        detail: `${replica.displayName(id)}: type '${typeName}' names ` +
                `no live element`,
      });
    }
  }

  // Declared bounds (lower/upper attributes on type-level associations).
  const outCounts = new Map<string, Map<string, number>>();
  for (const eid of edgeIds) {
    const map = replica.edgeMaps.get(eid)!;
    const src = replica.edgeEndpoints(eid)!.source;
    const assoc = map.query(TYPE_KEY);
    if (!assoc) continue;
    let bucket = outCounts.get(src);
    if (!bucket) outCounts.set(src, (bucket = new Map()));
    bucket.set(assoc, (bucket.get(assoc) ?? 0) + 1);
  }
  for (const eid of edgeIds) {
    const map = replica.edgeMaps.get(eid)!;
    const lower = map.query("lower");
    const upper = map.query("upper");
    if (lower === null && upper === null) continue;
    const assoc = map.query(NAME_KEY);
    if (!assoc) continue;
    const sourceType = replica.displayName(replica.edgeEndpoints(eid)!.source);
    const lo = lower ? Number.parseInt(lower, 10) || 0 : 0;
    const hi = upper === null || upper === "*" ? Infinity
      : Number.parseInt(upper, 10);
    for (const vid of vertexIds) {
      if (replica.vertexMaps.get(vid)!.query(TYPE_KEY) !== sourceType) continue;
      const count = outCounts.get(vid)?.get(assoc) ?? 0;
      if (count < lo || count > hi) {
        warnings.push({
          kind: "MultiplicityViolation", subject: vid,
          detail: `${replica.displayName(vid)}: ${count} '${assoc}' link(s), ` +
                  `bounds ${lo}..${upper === null ? "*" : upper}`,
        });
      }
    }
  }

  for (const id of allIds) {
    const typeName = replica.backing(id)!.query(TYPE_KEY);
    if (!typeName) continue;
    const matches = byName.get(typeName) ?? [];
    if (matches.length !== 1) continue;
    const typePotency = parsePotency(
      replica.backing(matches[0])!.query(POTENCY_KEY));
    if (typePotency === Infinity) continue;
    const own = parsePotency(replica.backing(id)!.query(POTENCY_KEY));
    if (own === Infinity || own >= typePotency) {
      warnings.push({
        kind: "PotencyViolation", subject: id,
        detail: `${replica.displayName(id)}: potency not below its type's`,
      });
    }
  }

  for (const [name, ids] of byName) {
    if (ids.length > 1) {
      warnings.push({
        kind: "AmbiguousName", subject: ids.sort()[0],
        detail: `${ids.length} live elements named '${name}'`,
      });
    }
  }

  warnings.sort((a, b) => (a.kind + a.subject + a.detail)
    .localeCompare(b.kind + b.subject + b.detail));
  return warnings;
}
