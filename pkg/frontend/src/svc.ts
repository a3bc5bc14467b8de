// Client side of the verification-code scheme: the strict marker grammar
// and the checksum, so a document can be stamped locally before signing
// and a code can be sanity-checked before asking the server.

import { sha256 } from "./crypto.js";

export const CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
export const CODE_LENGTH = 16;
export const PAYLOAD_LENGTH = 14;
export const MARKER_PREFIX = "SVC: ";

const CODE_RE = new RegExp(`^[${CROCKFORD}]{${CODE_LENGTH}}$`);

export function wellFormed(code: string): boolean {
  return CODE_RE.test(code);
}

/** Two checksum characters: the first ten bits of SHA-256 over the payload. */
export async function checksumFor(payload: string): Promise<string> {
  const digest = await sha256(new TextEncoder().encode(payload));
  const ten = (((digest[0]! << 8) | digest[1]!) >> 6) & 0x3ff;
  return CROCKFORD[ten >> 5]! + CROCKFORD[ten & 31]!;
}

export async function checksumValid(code: string): Promise<boolean> {
  if (!wellFormed(code)) return false;
  const expected = await checksumFor(code.slice(0, PAYLOAD_LENGTH));
  return code.slice(PAYLOAD_LENGTH) === expected;
}

export function markerLine(code: string): string {
  return `${MARKER_PREFIX}${code}\n`;
}

function lines(bytes: Uint8Array): string[] {
  return new TextDecoder("utf-8", { fatal: false }).decode(bytes).split("\n");
}

/** True when any line carries the marker prefix; such bodies must not be
 * stamped again (the service rejects double markers). */
export function hasMarker(bytes: Uint8Array): boolean {
  return lines(bytes).some((l) => l.startsWith(MARKER_PREFIX));
}

/** The embedded code, or null when no line starts with the prefix. A line
 * that starts with the prefix but does not parse is the server's problem
 * to reject; we surface it as-is. */
export function extractCode(bytes: Uint8Array): string | null {
  for (const line of lines(bytes)) {
    if (line.startsWith(MARKER_PREFIX)) {
      const code = line.slice(MARKER_PREFIX.length);
      return wellFormed(code) ? code : null;
    }
  }
  return null;
}

/** Append the marker line, separating with a newline when needed. */
export function embedMarker(bytes: Uint8Array, code: string): Uint8Array {
  const marker = new TextEncoder().encode(markerLine(code));
  const needsSep = bytes.length > 0 && bytes[bytes.length - 1] !== 0x0a;
  const out = new Uint8Array(bytes.length + (needsSep ? 1 : 0) + marker.length);
  out.set(bytes, 0);
  let off = bytes.length;
  if (needsSep) out[off++] = 0x0a;
  out.set(marker, off);
  return out;
}
