/**
 * The textual command language (CREATE / LINK / UPDATE / DELETE), with
 * the same grammar, escaping, and canonical flag order as the reference
 * peers, so frames round-trip byte-identically.
 */

export type Selector = { byName: string } | { byId: string };

export interface CreateCmd {
  verb: "CREATE"; name: string; typedBy: string | null;
  attrs: [string, string][];
}
export interface LinkCmd {
  verb: "LINK"; source: string; association: string; target: string;
  name: string | null; attrs: [string, string][];
}
export interface UpdateCmd {
  verb: "UPDATE"; selector: Selector; attrs: [string, string][];
}
export interface DeleteCmd { verb: "DELETE"; selector: Selector }

export type Command = CreateCmd | LinkCmd | UpdateCmd | DeleteCmd;

export class CommandSyntaxError extends Error {}

const RESERVED = new Set(["typedBy", "name", "id", "from", "to"]);
const ESCAPES: Record<string, string> = {
  "\\": "\\", '"': '"', t: "\t", n: "\n", r: "\r",
};
const UNESCAPES: Record<string, string> = {
  "\\": "\\\\", '"': '\\"', "\t": "\\t", "\n": "\\n", "\r": "\\r",
};
const UUID_RE = /^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$/;

function tokenize(text: string): string[] {
  const tokens: string[] = [];
  let i = 0;
  const n = text.length;
  while (i < n) {
    if (text[i] === " ") { i++; continue; }
    if (text[i] === '"') {
      i++;
      let value = "";
      for (;;) {
        if (i >= n) throw new CommandSyntaxError("unterminated quote");
        const ch = text[i];
        if (ch === "\\") {
          const esc = ESCAPES[text[i + 1]];
          if (esc === undefined) throw new CommandSyntaxError("bad escape");
          value += esc;
          i += 2;
        } else if (ch === '"') {
          i++;
          break;
        } else {
          value += ch;
          i++;
        }
      }
      if (i < n && text[i] !== " ") {
        throw new CommandSyntaxError("quoted value not followed by space");
      }
      tokens.push(value);
    } else {
      let j = text.indexOf(" ", i);
      if (j < 0) j = n;
      const tok = text.slice(i, j);
      if (/[\t\n\r]/.test(tok)) {
        throw new CommandSyntaxError("control character outside quotes");
      }
      tokens.push(tok);
      i = j;
    }
  }
  return tokens;
}

function pairFlags(tokens: string[]): [string, string][] {
  const out: [string, string][] = [];
  for (let i = 0; i < tokens.length; i += 2) {
    const tok = tokens[i];
    if (!tok.startsWith("-") || tok.length < 2) {
      throw new CommandSyntaxError(`expected a flag, got ${tok}`);
    }
    if (i + 1 >= tokens.length) {
      throw new CommandSyntaxError(`flag ${tok} has no value`);
    }
    out.push([tok.slice(1), tokens[i + 1]]);
  }
  return out;
}

export function parseCommand(text: string): Command {
  const tokens = tokenize(text);
  if (!tokens.length) throw new CommandSyntaxError("empty command");
  const verb = tokens[0];
  const flags = pairFlags(tokens.slice(1));

  if (verb === "CREATE") {
    let name: string | null = null;
    let typedBy: string | null = null;
    const attrs: [string, string][] = [];
    for (const [flag, value] of flags) {
      if (flag === "name" && name === null) name = value;
      else if (flag === "typedBy" && typedBy === null) typedBy = value;
      else if (flag === "id" || flag === "from" || flag === "to") {
        throw new CommandSyntaxError(`-${flag} not allowed on CREATE`);
      } else if (flag === "name" || flag === "typedBy") {
        throw new CommandSyntaxError(`duplicate -${flag}`);
      } else attrs.push([flag, value]);
    }
    if (name === null) throw new CommandSyntaxError("CREATE requires -name");
    return { verb: "CREATE", name, typedBy, attrs };
  }

  if (verb === "LINK") {
    let source: string | null = null;
    let association = "";
    let target: string | null = null;
    let linkName: string | null = null;
    const attrs: [string, string][] = [];
    for (const [flag, value] of flags) {
      if (flag === "from" && source === null) {
        const dot = value.lastIndexOf(".");
        if (dot <= 0 || dot === value.length - 1) {
          throw new CommandSyntaxError("-from takes {element}.{association}");
        }
        source = value.slice(0, dot);
        association = value.slice(dot + 1);
      } else if (flag === "to" && target === null) target = value;
      else if (flag === "name" && linkName === null) linkName = value;
      else if (flag === "id" || flag === "typedBy") {
        throw new CommandSyntaxError(`-${flag} not allowed on LINK`);
      } else if (flag === "from" || flag === "to" || flag === "name") {
        throw new CommandSyntaxError(`duplicate -${flag}`);
      } else attrs.push([flag, value]);
    }
    if (source === null) throw new CommandSyntaxError("LINK requires -from");
    if (target === null) throw new CommandSyntaxError("LINK requires -to");
    return { verb: "LINK", source, association, target, name: linkName, attrs };
  }

  if (verb === "UPDATE" || verb === "DELETE") {
    let name: string | null = null;
    let id: string | null = null;
    const attrs: [string, string][] = [];
    for (const [flag, value] of flags) {
      if (flag === "name" && name === null && id === null) name = value;
      else if (flag === "id" && id === null && name === null) {
        if (!UUID_RE.test(value)) {
          throw new CommandSyntaxError("-id must be a canonical uuid");
        }
        id = value;
      } else if (flag === "name" || flag === "id") {
        throw new CommandSyntaxError("both -name and -id given");
      } else if (flag === "from" || flag === "to") {
        throw new CommandSyntaxError(`-${flag} not allowed on ${verb}`);
      } else if (verb === "DELETE") {
        throw new CommandSyntaxError("DELETE takes only a selector");
      } else attrs.push([flag, value]);
    }
    if (name === null && id === null) {
      throw new CommandSyntaxError(`${verb} requires -name or -id`);
    }
    const selector: Selector = id !== null ? { byId: id } : { byName: name! };
    return verb === "DELETE"
      ? { verb: "DELETE", selector }
      : { verb: "UPDATE", selector, attrs };
  }

  throw new CommandSyntaxError(`unknown verb ${verb}`);
}

function quote(value: string): string {
  if (value && !/[ "\\\t\n\r]/.test(value)) return value;
  let out = '"';
  for (const ch of value) out += UNESCAPES[ch] ?? ch;
  return out + '"';
}

export function serializeCommand(cmd: Command): string {
  const parts: string[] = [cmd.verb];
  const flag = (name: string, value: string) => {
    parts.push(`-${name}`, quote(value));
  };
  const attrFlags = (attrs: [string, string][]) => {
    for (const [key, value] of attrs) {
      if (!key || key.startsWith("-") || /[ "\t\n\r]/.test(key)) {
        throw new Error(`attribute key ${key} cannot be serialized`);
      }
      if (RESERVED.has(key) && key !== "typedBy") {
        throw new Error(`attribute key ${key} collides with a reserved flag`);
      }
      flag(key, value);
    }
  };
  switch (cmd.verb) {
    case "CREATE":
      flag("name", cmd.name);
      if (cmd.typedBy !== null) flag("typedBy", cmd.typedBy);
      attrFlags(cmd.attrs);
      break;
    case "LINK":
      if (cmd.name !== null) flag("name", cmd.name);
      if (cmd.association.includes(".")) {
        throw new Error("association names cannot contain '.'");
      }
      flag("from", `${cmd.source}.${cmd.association}`);
      flag("to", cmd.target);
      attrFlags(cmd.attrs);
      break;
    case "UPDATE":
      selectorFlags(cmd.selector, flag);
      attrFlags(cmd.attrs);
      break;
    case "DELETE":
      selectorFlags(cmd.selector, flag);
      break;
  }
  return parts.join(" ");
}

function selectorFlags(sel: Selector,
                       flag: (n: string, v: string) => void): void {
  if ("byName" in sel) flag("name", sel.byName);
  else flag("id", sel.byId);
}
