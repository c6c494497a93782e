/**
 * Browser wiring: renders the containment tree plus a dangling tray,
 * turns user gestures into single command frames (create, rename title,
 * drag-to-link, delete, potency edit), and shows conformance warnings
 * inline instead of blocking anyone.
 */

import { checkConformance } from "./conformance.js";
import type { Warning } from "./conformance.js";
import { buildInstanceCreate, formatPotency, NAME_KEY, POTENCY_KEY,
         TYPE_KEY } from "./replica.js";
import { EditorSession } from "./session.js";
import { buildView } from "./view.js";
import type { ViewNode } from "./view.js";

const params = new URLSearchParams(location.search);
const url = params.get("server") ??
  `ws://${location.hostname || "127.0.0.1"}:7701`;

const $ = (id: string) => document.getElementById(id)!;

const session = new EditorSession(url, {
  onChange: render,
  onStatus: (state, detail) => {
    const banner = $("banner");
    banner.textContent = `${state}: ${detail}`;
    banner.className = state === "live" ? "banner live" : "banner down";
  },
});

function toast(text: string): void {
  const el = $("toast");
  el.textContent = text;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 2500);
}

function submit(cmd: Parameters<EditorSession["submit"]>[0]): void {
  const result = session.submit(cmd);
  if (!result.ok) toast(result.error ?? "rejected");
  render();
}

function nodeElement(node: ViewNode, warnings: Map<string, Warning[]>):
    HTMLElement {
  const li = document.createElement("li");
  const head = document.createElement("div");
  head.className = "node" + (node.dangling ? " dangling" : "");
  head.draggable = true;
  head.dataset.id = node.id;
  head.dataset.name = node.name;

  const label = document.createElement("span");
  label.className = "label";
  label.textContent = `${node.name} : ${node.typeName || "Clabject"} ` +
    `(p${formatPotency(node.potency)})`;
  head.appendChild(label);

  for (const [key, value] of node.attrs) {
    const attr = document.createElement("span");
    attr.className = "attr";
    attr.textContent = `${key}=${value}`;
    attr.title = "click to edit";
    attr.onclick = () => {
      const next = prompt(`${node.name}.${key} =`, value);
      if (next !== null) {
        submit({ verb: "UPDATE", selector: { byId: node.id },
                 attrs: [[key, next]] });
      }
    };
    head.appendChild(attr);
  }

  const warns = warnings.get(node.id) ?? [];
  if (warns.length) {
    const w = document.createElement("span");
    w.className = "warn";
    w.textContent = "⚠";
    w.title = warns.map((x) => x.detail).join("\n");
    head.appendChild(w);
  }

  const del = document.createElement("button");
  del.textContent = "×";
  del.title = "delete";
  del.onclick = () => submit({ verb: "DELETE", selector: { byId: node.id } });
  head.appendChild(del);

  head.ondragstart = (ev) => ev.dataTransfer!.setData("text/plain", node.id);
  head.ondragover = (ev) => ev.preventDefault();
  head.ondrop = (ev) => {
    ev.preventDefault();
    const sourceId = ev.dataTransfer!.getData("text/plain");
    if (!sourceId || sourceId === node.id) return;
    const port = prompt("link through which association?", "topic");
    if (port) {
      submit({ verb: "LINK", source: sourceId, association: port,
               target: node.id, name: null, attrs: [] });
    }
  };

  li.appendChild(head);
  if (node.refs.length) {
    const refs = document.createElement("div");
    refs.className = "refs";
    refs.textContent = node.refs
      .map((r) => `→ [${r.edgeName} : ${r.association}] ${r.targetName}`)
      .join("   ");
    li.appendChild(refs);
  }
  if (node.children.length) {
    const ul = document.createElement("ul");
    for (const child of node.children) {
      ul.appendChild(nodeElement(child.node, warnings));
    }
    li.appendChild(ul);
  }
  return li;
}

function render(): void {
  const tree = buildView(session.replica);
  const warnings = new Map<string, Warning[]>();
  const all = checkConformance(session.replica);
  for (const w of all) {
    (warnings.get(w.subject) ?? warnings.set(w.subject, []).get(w.subject)!)
      .push(w);
  }

  const anchoredList = $("tree");
  const danglingList = $("tray");
  anchoredList.textContent = "";
  danglingList.textContent = "";
  for (const root of tree.roots) {
    (root.dangling ? danglingList : anchoredList)
      .appendChild(nodeElement(root, warnings));
  }
  $("tray-box").style.display = danglingList.childNodes.length ? "" : "none";

  const vl = $("violations");
  vl.textContent = all.length
    ? all.map((w) => `${w.kind}: ${w.detail}`).join("\n")
    : "no conformance findings";

  // Language-designer panel: classes (positive potency) with editable potency.
  const panel = $("classes");
  panel.textContent = "";
  for (const id of session.replica.liveVertexIds()) {
    const map = session.replica.vertexMaps.get(id)!;
    const potency = map.query(POTENCY_KEY) ?? "*";
    if (potency === "0") continue;
    const row = document.createElement("div");
    const name = map.query(NAME_KEY) ?? "";
    row.textContent = `${name} (type ${map.query(TYPE_KEY) ?? "-"}) potency `;
    const input = document.createElement("input");
    input.value = potency;
    input.size = 2;
    input.onchange = () => submit({ verb: "UPDATE", selector: { byId: id },
                                    attrs: [["potency", input.value]] });
    row.appendChild(input);
    panel.appendChild(row);
  }
}

($("create-form") as HTMLFormElement).onsubmit = (ev) => {
  ev.preventDefault();
  const type = ($("create-type") as HTMLInputElement).value.trim();
  const name = ($("create-name") as HTMLInputElement).value.trim();
  if (!type || !name) return;
  try {
    submit(buildInstanceCreate(session.replica, type, name));
    ($("create-name") as HTMLInputElement).value = "";
  } catch (err) {
    toast(String(err));
  }
};

session.connect();
render();
