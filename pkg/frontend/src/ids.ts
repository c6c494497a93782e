/**
 * Deterministic element ids: every replica applying the same stamped
 * operation derives the same uuid, so ids never travel on the wire.
 * Name-based (version 5) uuids need SHA-1; a compact synchronous
 * implementation is included because the browser offers no sync digest.
 */

import type { Stamp } from "./stamps.js";

export function sha1(message: Uint8Array): Uint8Array {
  const ml = message.length;
  const withOne = ml + 1;
  const blocks = Math.ceil((withOne + 8) / 64);
  const padded = new Uint8Array(blocks * 64);
  padded.set(message);
  padded[ml] = 0x80;
  const bitLen = ml * 8;
  const dv = new DataView(padded.buffer);
  dv.setUint32(padded.length - 8, Math.floor(bitLen / 0x100000000));
  dv.setUint32(padded.length - 4, bitLen >>> 0);

  let h0 = 0x67452301, h1 = 0xefcdab89, h2 = 0x98badcfe,
      h3 = 0x10325476, h4 = 0xc3d2e1f0;
  const w = new Int32Array(80);
  const rol = (x: number, n: number) => (x << n) | (x >>> (32 - n));

  for (let block = 0; block < padded.length; block += 64) {
    for (let i = 0; i < 16; i++) w[i] = dv.getInt32(block + i * 4);
    for (let i = 16; i < 80; i++) {
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    }
    let a = h0, b = h1, c = h2, d = h3, e = h4;
    for (let i = 0; i < 80; i++) {
      let f: number, k: number;
      if (i < 20) { f = (b & c) | (~b & d); k = 0x5a827999; }
      else if (i < 40) { f = b ^ c ^ d; k = 0x6ed9eba1; }
      else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8f1bbcdc; }
      else { f = b ^ c ^ d; k = 0xca62c1d6; }
      const t = (rol(a, 5) + f + e + k + w[i]) | 0;
      e = d; d = c; c = rol(b, 30); b = a; a = t;
    }
    h0 = (h0 + a) | 0; h1 = (h1 + b) | 0; h2 = (h2 + c) | 0;
    h3 = (h3 + d) | 0; h4 = (h4 + e) | 0;
  }
  const out = new Uint8Array(20);
  const ov = new DataView(out.buffer);
  ov.setInt32(0, h0); ov.setInt32(4, h1); ov.setInt32(8, h2);
  ov.setInt32(12, h3); ov.setInt32(16, h4);
  return out;
}

export function uuidToBytes(uuid: string): Uint8Array {
  const hex = uuid.replace(/-/g, "");
  if (hex.length !== 32) throw new Error(`bad uuid: ${uuid}`);
  const out = new Uint8Array(16);
  for (let i = 0; i < 16; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

export function bytesToUuid(bytes: Uint8Array): string {
  const hex = Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
  return `${hex.slice(0, 8)}-${hex.slice(8, 12)}-${hex.slice(12, 16)}-` +
         `${hex.slice(16, 20)}-${hex.slice(20)}`;
}

export function uuid5(namespace: string, name: string): string {
  const ns = uuidToBytes(namespace);
  const data = new TextEncoder().encode(name);
  const joined = new Uint8Array(ns.length + data.length);
  joined.set(ns);
  joined.set(data, ns.length);
  const digest = sha1(joined).slice(0, 16);
  digest[6] = (digest[6] & 0x0f) | 0x50;
  digest[8] = (digest[8] & 0x3f) | 0x80;
  return bytesToUuid(digest);
}

export const ELEMENT_NAMESPACE = "a6f94e99-2ff2-56a3-9c8c-4d1179d96a80";

const ROLE_NIBBLE: Record<"v" | "e", number> = { v: 0x0a, e: 0x0b };

export function mintElementId(stamp: Stamp, role: "v" | "e"): string {
  const base = uuid5(ELEMENT_NAMESPACE,
                     `${stamp.replica}:${stamp.nanos}:${role}`);
  const bytes = uuidToBytes(base);
  bytes[15] = (bytes[15] & 0xf0) | ROLE_NIBBLE[role];
  return bytesToUuid(bytes);
}

/** Whether an id names a vertex or an edge (minted ids carry a nibble). */
export function idRole(id: string): "v" | "e" {
  const low = parseInt(id.slice(-1), 16);
  return low === ROLE_NIBBLE.e ? "e" : "v";
}

export function namePlaceholderId(name: string): string {
  return uuid5(ELEMENT_NAMESPACE, `name:${name}`);
}

export function randomUuid(): string {
  const bytes = new Uint8Array(16);
  globalThis.crypto.getRandomValues(bytes);
  bytes[6] = (bytes[6] & 0x0f) | 0x40;
  bytes[8] = (bytes[8] & 0x3f) | 0x80;
  return bytesToUuid(bytes);
}
