/**
 * A compact replica of the shared model: last-writer-wins entry maps over
 * a directed multigraph, applying the same rules as the reference peers,
 * anchored by exported conformance vectors rather than re-derived theory.
 *
 * Observable rules (identical to the wire peers):
 *  - presence: newest add stamp at least the newest remove stamp (add
 *    wins exact ties); among equal-stamp adds the larger value wins;
 *  - adding an edge re-adds both endpoints at the edge's stamp, so a
 *    newer link revives a deleted vertex;
 *  - an edge is live when its own entry is live and its add stamp beats
 *    each endpoint's newest removal;
 *  - element ids derive from the creating operation's stamp.
 */

import { parseCommand, serializeCommand } from "./commands.js";
import type { Command, LinkCmd, Selector } from "./commands.js";
import type { Frame } from "./frames.js";
import { idRole, mintElementId, namePlaceholderId } from "./ids.js";
import { cmpStamp, cmpText, minusEpsilon } from "./stamps.js";
import type { Stamp } from "./stamps.js";

const UUID_RE = /^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$/;

export const NAME_KEY = "~name";
export const TYPE_KEY = "~type";
export const KIND_KEY = "~kind";
export const POTENCY_KEY = "~potency";
export const SOURCE_KEY = "~source";
export const TARGET_KEY = "~target";

const KIND_NAMES = new Set(["Node", "Model", "Clabject", "Association",
                            "Composition", "Aggregation", "Attribute"]);
const ASSOCIATION_KINDS = new Set(["Association", "Composition", "Aggregation"]);

interface Entry { stamp: Stamp; value: string }

function cmpEntry(a: Entry, b: Entry): number {
  const s = cmpStamp(a.stamp, b.stamp);
  return s !== 0 ? s : cmpText(a.value, b.value);
}

export class EntryMap {
  private addMax = new Map<string, Entry>();
  private removeMax = new Map<string, Stamp>();

  add(key: string, value: string, stamp: Stamp): void {
    const entry = { stamp, value };
    const cur = this.addMax.get(key);
    if (!cur || cmpEntry(entry, cur) > 0) this.addMax.set(key, entry);
  }

  remove(key: string, stamp: Stamp): void {
    const cur = this.removeMax.get(key);
    if (!cur || cmpStamp(stamp, cur) > 0) this.removeMax.set(key, stamp);
  }

  update(key: string, value: string, stamp: Stamp): void {
    if (this.lookup(key)) this.remove(key, minusEpsilon(stamp));
    this.add(key, value, stamp);
  }

  lookup(key: string): boolean {
    const added = this.addMax.get(key);
    if (!added) return false;
    const removed = this.removeMax.get(key);
    return !removed || cmpStamp(removed, added.stamp) <= 0;
  }

  query(key: string): string | null {
    return this.lookup(key) ? this.addMax.get(key)!.value : null;
  }

  liveItems(): [string, string][] {
    const out: [string, string][] = [];
    for (const key of this.addMax.keys()) {
      if (this.lookup(key)) out.push([key, this.addMax.get(key)!.value]);
    }
    return out.sort((a, b) => cmpText(a[0], b[0]) || cmpText(a[1], b[1]));
  }
}

export interface ApplyResult {
  ok: boolean;
  error?: string;
  effective?: Command;
  elementId?: string;
}

export class ModelReplica {
  readonly vertexMaps = new Map<string, EntryMap>();
  readonly edgeMaps = new Map<string, EntryMap>();
  private vAdd = new Map<string, Stamp>();
  private vRemove = new Map<string, Stamp>();
  private eAdd = new Map<string, Stamp>();
  private eRemove = new Map<string, Stamp>();
  private endpoints = new Map<string, { source: string; target: string }>();
  private incidence = new Map<string, Set<string>>();

  // -- liveness ------------------------------------------------------------

  vertexLive(id: string): boolean {
    const added = this.vAdd.get(id);
    if (!added) return false;
    const removed = this.vRemove.get(id);
    return !removed || cmpStamp(removed, added) <= 0;
  }

  edgeLive(id: string): boolean {
    const added = this.eAdd.get(id);
    if (!added) return false;
    const removed = this.eRemove.get(id);
    if (removed && cmpStamp(removed, added) > 0) return false;
    const ends = this.endpoints.get(id);
    if (!ends) return false;
    for (const endpoint of [ends.source, ends.target]) {
      const vr = this.vRemove.get(endpoint);
      if (vr && cmpStamp(added, vr) <= 0) return false;
    }
    return true;
  }

  liveVertexIds(): string[] {
    return [...this.vAdd.keys()].filter((id) => this.vertexLive(id)).sort();
  }

  liveEdgeIds(): string[] {
    return [...this.eAdd.keys()].filter((id) => this.edgeLive(id)).sort();
  }

  edgeEndpoints(id: string): { source: string; target: string } | null {
    return this.endpoints.get(id) ?? null;
  }

  // -- raw graph effects -----------------------------------------------------

  private ensureVertex(id: string): EntryMap {
    let m = this.vertexMaps.get(id);
    if (!m) {
      m = new EntryMap();
      this.vertexMaps.set(id, m);
    }
    return m;
  }

  private ensureEdge(id: string): EntryMap {
    let m = this.edgeMaps.get(id);
    if (!m) {
      m = new EntryMap();
      this.edgeMaps.set(id, m);
    }
    return m;
  }

  private maxInto(map: Map<string, Stamp>, id: string, stamp: Stamp): void {
    const cur = map.get(id);
    if (!cur || cmpStamp(stamp, cur) > 0) map.set(id, stamp);
  }

  private addVertexId(id: string, stamp: Stamp): EntryMap {
    const m = this.ensureVertex(id);
    this.maxInto(this.vAdd, id, stamp);
    return m;
  }

  private addEdgeId(id: string, source: string, target: string,
                    stamp: Stamp): EntryMap {
    const m = this.ensureEdge(id);
    if (!this.endpoints.has(id)) {
      this.endpoints.set(id, { source, target });
      m.add(SOURCE_KEY, source, stamp);
      m.add(TARGET_KEY, target, stamp);
    }
    this.maxInto(this.eAdd, id, stamp);
    for (const endpoint of [source, target]) {
      this.ensureVertex(endpoint);
      this.maxInto(this.vAdd, endpoint, stamp);
      let bucket = this.incidence.get(endpoint);
      if (!bucket) {
        bucket = new Set();
        this.incidence.set(endpoint, bucket);
      }
      bucket.add(id);
    }
    return m;
  }

  private cascadeRemoveVertex(id: string, stamp: Stamp): void {
    this.ensureVertex(id);
    for (const eid of this.incidence.get(id) ?? []) {
      if (this.edgeLive(eid)) this.maxInto(this.eRemove, eid, stamp);
    }
    this.maxInto(this.vRemove, id, stamp);
  }

  // -- live name resolution ---------------------------------------------------

  liveIdsNamed(name: string): string[] {
    const out: string[] = [];
    for (const id of this.liveVertexIds()) {
      if (this.vertexMaps.get(id)!.query(NAME_KEY) === name) out.push(id);
    }
    for (const id of this.liveEdgeIds()) {
      if (this.edgeMaps.get(id)!.query(NAME_KEY) === name) out.push(id);
    }
    return out.sort();
  }

  backing(id: string): EntryMap | null {
    return this.edgeMaps.get(id) ?? this.vertexMaps.get(id) ?? null;
  }

  displayName(id: string): string {
    return this.backing(id)?.query(NAME_KEY) || id;
  }

  effectiveKind(id: string): string {
    const map = this.backing(id);
    if (!map) return "Clabject";
    const stored = map.query(KIND_KEY) ?? "Clabject";
    if (stored !== "Association" || !this.edgeMaps.has(id)) return stored;
    const typeName = map.query(TYPE_KEY);
    if (!typeName) return stored;
    const ids = this.liveIdsNamed(typeName);
    if (ids.length === 1 && this.edgeMaps.has(ids[0])) {
      const typeKind = this.edgeMaps.get(ids[0])!.query(KIND_KEY) ?? "";
      if (ASSOCIATION_KINDS.has(typeKind)) return typeKind;
    }
    return stored;
  }

  // -- command application -----------------------------------------------------

  applyFrame(frame: Frame): void {
    if (frame.kind !== "U") return;
    this.applyRemote(parseCommand(frame.command), frame.stamp);
  }

  applyRemote(cmd: Command, stamp: Stamp): void {
    switch (cmd.verb) {
      case "CREATE": {
        const vid = mintElementId(stamp, "v");
        const map = this.addVertexId(vid, stamp);
        map.add(NAME_KEY, cmd.name, stamp);
        map.add(KIND_KEY, "Clabject", stamp);
        if (cmd.typedBy !== null) map.add(TYPE_KEY, cmd.typedBy, stamp);
        let potency: string | null = null;
        for (const [key, value] of cmd.attrs) {
          if (key === "potency") potency = value;
          else map.add(key, value, stamp);
        }
        map.add(POTENCY_KEY, potency ?? "*", stamp);
        break;
      }
      case "LINK": {
        const source = this.resolveRefRemote(cmd.source);
        const target = this.resolveRefRemote(cmd.target);
        const eid = mintElementId(stamp, "e");
        const name = cmd.name ?? this.autoEdgeName(cmd.association);
        const map = this.addEdgeId(eid, source, target, stamp);
        map.add(NAME_KEY, name, stamp);
        map.add(TYPE_KEY, cmd.association, stamp);
        map.add(KIND_KEY, storedLinkKind(cmd.association), stamp);
        let potency: string | null = null;
        for (const [key, value] of cmd.attrs) {
          if (key === "potency") potency = value;
          else map.add(key, value, stamp);
        }
        map.add(POTENCY_KEY, potency ?? "*", stamp);
        break;
      }
      case "UPDATE": {
        if (cmd.attrs.some(([key]) => key === "name")) {
          throw new Error("names are fixed at creation");
        }
        const id = this.selectorIdRemote(cmd.selector);
        const map = this.edgeMaps.get(id) ?? this.ensureVertex(id);
        for (const [key, value] of cmd.attrs) {
          if (key === "potency") map.update(POTENCY_KEY, value, stamp);
          else if (key === "typedBy") map.update(TYPE_KEY, value, stamp);
          else map.update(key, value, stamp);
        }
        break;
      }
      case "DELETE": {
        const id = this.selectorIdRemote(cmd.selector);
        if (this.edgeMaps.has(id) ||
            (!this.vertexMaps.has(id) && idRole(id) === "e")) {
          this.ensureEdge(id);
          this.maxInto(this.eRemove, id, stamp);
        } else {
          this.cascadeRemoveVertex(id, stamp);
        }
        break;
      }
    }
  }

  /** Optimistic local apply; yields the canonical id-resolved command to
   * put on the wire (errors leave the replica untouched). */
  applyLocal(cmd: Command, stamp: Stamp): ApplyResult {
    try {
      switch (cmd.verb) {
        case "CREATE": {
          if (!cmd.name) return { ok: false, error: "name must be non-empty" };
          if (this.liveIdsNamed(cmd.name).length) {
            return { ok: false, error: `live element named ${cmd.name} exists` };
          }
          this.applyRemote(cmd, stamp);
          return { ok: true, effective: cmd,
                   elementId: mintElementId(stamp, "v") };
        }
        case "LINK": {
          const source = this.resolveRefLocal(cmd.source);
          const target = this.resolveRefLocal(cmd.target);
          const name = cmd.name ?? this.autoEdgeName(cmd.association);
          const effective: LinkCmd = { ...cmd, source, target, name };
          this.applyRemote(effective, stamp);
          return { ok: true, effective,
                   elementId: mintElementId(stamp, "e") };
        }
        case "UPDATE": {
          const id = this.resolveSelectorLocal(cmd.selector);
          const effective: Command = { ...cmd, selector: { byId: id } };
          this.applyRemote(effective, stamp);
          return { ok: true, effective, elementId: id };
        }
        case "DELETE": {
          const id = this.resolveSelectorLocal(cmd.selector);
          const effective: Command = { verb: "DELETE", selector: { byId: id } };
          this.applyRemote(effective, stamp);
          return { ok: true, effective, elementId: id };
        }
      }
    } catch (err) {
      return { ok: false, error: String(err) };
    }
  }

  private autoEdgeName(association: string): string {
    let count = 0;
    for (const id of this.liveEdgeIds()) {
      if (this.edgeMaps.get(id)!.query(TYPE_KEY) === association) count++;
    }
    return `${association}_${count}`;
  }

  private resolveRefRemote(ref: string): string {
    if (UUID_RE.test(ref)) return ref;
    const ids = this.liveIdsNamed(ref);
    if (ids.length) return ids[ids.length - 1];
    return namePlaceholderId(ref);
  }

  private resolveRefLocal(ref: string): string {
    if (UUID_RE.test(ref) && this.backing(ref)) return ref;
    const ids = this.liveIdsNamed(ref);
    if (!ids.length) throw new Error(`unknown element: ${ref}`);
    if (ids.length > 1) throw new Error(`ambiguous name: ${ref}`);
    return ids[0];
  }

  private selectorIdRemote(sel: Selector): string {
    if ("byId" in sel) return sel.byId;
    const ids = this.liveIdsNamed(sel.byName);
    if (ids.length) return ids[ids.length - 1];
    return namePlaceholderId(sel.byName);
  }

  private resolveSelectorLocal(sel: Selector): string {
    if ("byId" in sel) {
      if (!this.backing(sel.byId) || !this.isLive(sel.byId)) {
        throw new Error(`unknown element: ${sel.byId}`);
      }
      return sel.byId;
    }
    const ids = this.liveIdsNamed(sel.byName);
    if (!ids.length) throw new Error(`unknown element: ${sel.byName}`);
    if (ids.length > 1) throw new Error(`ambiguous name: ${sel.byName}`);
    return ids[0];
  }

  isLive(id: string): boolean {
    return this.edgeMaps.has(id) ? this.edgeLive(id) : this.vertexLive(id);
  }

  // -- observable snapshot -------------------------------------------------------

  snapshot(): { vertices: [string, [string, string][]][];
                edges: [string, string, string, [string, string][]][] } {
    const vertices: [string, [string, string][]][] = [];
    for (const id of this.liveVertexIds()) {
      vertices.push([id, this.vertexMaps.get(id)!.liveItems()]);
    }
    const edges: [string, string, string, [string, string][]][] = [];
    for (const id of this.liveEdgeIds()) {
      const entries = this.edgeMaps.get(id)!.liveItems()
        .filter(([k]) => k !== SOURCE_KEY && k !== TARGET_KEY);
      const ends = this.endpoints.get(id)!;
      edges.push([id, ends.source, ends.target, entries]);
    }
    return { vertices, edges };
  }
}

function storedLinkKind(association: string): string {
  // Deliberately state-free so delivery order cannot leak into state;
  // declared compositions refine at read time via effectiveKind.
  if (KIND_NAMES.has(association)) {
    return ASSOCIATION_KINDS.has(association) ? association : "Association";
  }
  return "Association";
}

export function parsePotency(raw: string | null): number {
  if (raw === null || raw === "*") return Infinity;
  const n = Number.parseInt(raw, 10);
  return Number.isNaN(n) || n < 0 ? Infinity : n;
}

export function formatPotency(p: number): string {
  return p === Infinity ? "*" : String(p);
}

/** Mirror of the command-line editor's CREATE verb: instantiate a type,
 * materializing the decremented potency and initializing declared
 * attributes (empty declared defaults become the instance name). */
export function buildInstanceCreate(replica: ModelReplica, typeName: string,
                                    name: string): Command {
  const ids = replica.liveIdsNamed(typeName);
  if (ids.length !== 1) {
    return { verb: "CREATE", name, typedBy: typeName, attrs: [] };
  }
  const typeMap = replica.backing(ids[0])!;
  const potency = parsePotency(typeMap.query(POTENCY_KEY));
  if (potency === 0) throw new Error(`${typeName} has potency 0`);
  const attrs: [string, string][] = [
    ["potency", formatPotency(potency === Infinity ? Infinity : potency - 1)],
  ];
  for (const [key, value] of typeMap.liveItems()) {
    if (key.startsWith("~")) continue;
    attrs.push([key, value || name]);
  }
  return { verb: "CREATE", name, typedBy: typeName, attrs };
}

export { serializeCommand };
