// Hex plumbing and the HMAC envelope the service expects. WebCrypto only,
// so the same module runs in the browser and under node-based tests.

export function hexToBytes(hex: string): Uint8Array {
  const clean = hex.trim();
  if (!/^[0-9a-fA-F]*$/.test(clean) || clean.length % 2 !== 0) {
    throw new Error("not a hex string");
  }
  const out = new Uint8Array(clean.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(clean.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

/** 20-byte address from its 0x-prefixed rendering. */
export function addressBytes(address: string): Uint8Array {
  if (!address.startsWith("0x")) throw new Error("address must start with 0x");
  const bytes = hexToBytes(address.slice(2));
  if (bytes.length !== 20) throw new Error("address must be 20 bytes");
  return bytes;
}

export async function sha256(data: Uint8Array): Promise<Uint8Array> {
  return new Uint8Array(await crypto.subtle.digest("SHA-256", data as BufferSource));
}

export async function hmacSha256(key: Uint8Array, message: Uint8Array): Promise<Uint8Array> {
  const cryptoKey = await crypto.subtle.importKey(
    "raw",
    key as BufferSource,
    { name: "HMAC", hash: "SHA-256" },
    false,
    ["sign"],
  );
  return new Uint8Array(await crypto.subtle.sign("HMAC", cryptoKey, message as BufferSource));
}

/** MAC over the server nonce plus the caller address; redeemed at login. */
export async function loginProof(
  nonceHex: string,
  address: string,
  key: Uint8Array,
): Promise<string> {
  const mac = await hmacSha256(key, concatBytes(hexToBytes(nonceHex), addressBytes(address)));
  return bytesToHex(mac);
}

/** Document signature: MAC over the stamped body plus the signer address. */
export async function signBody(
  body: Uint8Array,
  address: string,
  key: Uint8Array,
): Promise<string> {
  const mac = await hmacSha256(key, concatBytes(body, addressBytes(address)));
  return bytesToHex(mac);
}
