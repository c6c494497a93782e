/**
 * Wire framing, mirroring the server protocol: TAB-separated fields, one
 * frame per WebSocket message (the stream transport adds newlines, the
 * message transport does not).
 */

import type { Stamp } from "./stamps.js";

export type Frame =
  | { kind: "U"; clientId: string; stamp: Stamp; command: string }
  | { kind: "HELLO"; clientId: string }
  | { kind: "SREQ" }
  | { kind: "SBEG" }
  | { kind: "SEND" };

export class ProtocolError extends Error {}

const UUID_RE = /^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$/;

export function encodeFrame(frame: Frame): string {
  switch (frame.kind) {
    case "U":
      if (frame.command.includes("\t") || frame.command.includes("\n")) {
        throw new ProtocolError("command payload contains framing characters");
      }
      return ["U", frame.clientId, frame.stamp.nanos.toString(),
              frame.stamp.replica, frame.command].join("\t");
    case "HELLO":
      return `HELLO\t${frame.clientId}`;
    default:
      return frame.kind;
  }
}

export function decodeFrame(line: string): Frame {
  const clean = line.replace(/[\r\n]+$/, "");
  if (!clean) throw new ProtocolError("empty frame");
  const tab = clean.indexOf("\t");
  const kind = tab < 0 ? clean : clean.slice(0, tab);
  const rest = tab < 0 ? "" : clean.slice(tab + 1);
  if (kind === "U") {
    const fields = splitN(rest, "\t", 4);
    if (fields.length !== 4) {
      throw new ProtocolError(`update frame needs 4 fields, got ${fields.length}`);
    }
    const [clientId, rawNanos, replica, command] = fields;
    if (!UUID_RE.test(clientId) || !UUID_RE.test(replica) ||
        !/^\d+$/.test(rawNanos)) {
      throw new ProtocolError(`bad update frame field in: ${clean}`);
    }
    return { kind: "U", clientId, stamp: { nanos: BigInt(rawNanos), replica },
             command };
  }
  if (kind === "HELLO") {
    if (!UUID_RE.test(rest)) throw new ProtocolError(`bad HELLO id: ${rest}`);
    return { kind: "HELLO", clientId: rest };
  }
  if ((kind === "SREQ" || kind === "SBEG" || kind === "SEND") && !rest) {
    return { kind };
  }
  throw new ProtocolError(`unknown frame kind: ${kind}`);
}

function splitN(text: string, sep: string, n: number): string[] {
  const out: string[] = [];
  let rest = text;
  while (out.length < n - 1) {
    const i = rest.indexOf(sep);
    if (i < 0) break;
    out.push(rest.slice(0, i));
    rest = rest.slice(i + 1);
  }
  out.push(rest);
  return out;
}
