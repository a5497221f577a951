import { existsSync, unlinkSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  decodeFloat32Base64,
  decodeVector,
  encodeFloat32Base64,
  encodeVector,
} from "../src/codec.js";

describe("float32 base64 codec", () => {
  it("round trips exactly", () => {
    const v = new Float32Array([0.1, -2.5, 1e-7, 42.0]);
    const back = decodeFloat32Base64(encodeFloat32Base64(v));
    expect(Buffer.compare(Buffer.from(back.buffer), Buffer.from(v.buffer))).toBe(0);
  });

  it("rejects byte lengths not divisible by 4", () => {
    expect(() => decodeFloat32Base64(Buffer.from("abc").toString("base64"))).toThrow();
  });

  it("inlines small vectors", () => {
    const payload = encodeVector(new Float32Array(16));
    expect("b64" in payload).toBe(true);
  });

  it("spills large vectors to a file", () => {
    const big = new Float32Array(8193).map((_, i) => i);
    const payload = encodeVector(big);
    expect("file" in payload).toBe(true);
    const back = decodeVector(payload);
    expect(Buffer.compare(Buffer.from(back.buffer), Buffer.from(big.buffer))).toBe(0);
    if ("file" in payload && existsSync(payload.file)) {
      unlinkSync(payload.file);
    }
  });
});
