// Vector transport codec: little-endian float32 as base64 (inline) or a raw
// binary file path, matching the engine's wire convention.

import { readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const INLINE_VECTOR_LIMIT = 8192;

export type VectorPayload = { b64: string } | { file: string };

export const encodeFloat32Base64 = (vector: Float32Array): string => {
  const buffer = Buffer.from(vector.buffer, vector.byteOffset, vector.byteLength);
  return buffer.toString("base64");
};

export const decodeFloat32Base64 = (base64: string): Float32Array => {
  const buffer = Buffer.from(base64, "base64");
  if (buffer.byteLength % 4 !== 0) {
    throw new Error(`vector byte length ${buffer.byteLength} not divisible by 4`);
  }
  // copy so the view owns aligned memory independent of the Buffer pool
  const copy = new Uint8Array(buffer.byteLength);
  copy.set(buffer);
  return new Float32Array(copy.buffer);
};

let tempCounter = 0;

export const encodeVector = (
  vector: Float32Array,
  inlineLimit: number = INLINE_VECTOR_LIMIT,
): VectorPayload => {
  if (vector.length <= inlineLimit) {
    return { b64: encodeFloat32Base64(vector) };
  }
  const path = join(
    tmpdir(),
    `adapt-vec-${process.pid}-${Date.now()}-${tempCounter++}.f32`,
  );
  writeFileSync(
    path,
    Buffer.from(vector.buffer, vector.byteOffset, vector.byteLength),
  );
  return { file: path };
};

export const decodeVector = (payload: VectorPayload): Float32Array => {
  if ("b64" in payload) {
    return decodeFloat32Base64(payload.b64);
  }
  const raw = readFileSync(payload.file);
  const copy = new Uint8Array(raw.byteLength);
  copy.set(raw);
  return new Float32Array(copy.buffer);
};
