import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { decodeFrame, encodeFrame, WireError } from "../src/wire.js";

interface Vector {
  name: string;
  seq: number;
  pts_ms: number;
  pcm_hex: string;
  frame_hex: string;
}

const vectorsPath = fileURLToPath(
  new URL("../../fixtures/golden/wire_vectors.json", import.meta.url),
);
const vectors: Vector[] = JSON.parse(readFileSync(vectorsPath, "utf-8"));

function fromHex(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

function toHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

describe("wire conformance vectors", () => {
  it.each(vectors.map((v) => [v.name, v] as const))("encodes %s", (_name, vector) => {
    const encoded = encodeFrame({
      seq: vector.seq,
      ptsMs: BigInt(vector.pts_ms),
      pcm: fromHex(vector.pcm_hex),
    });
    expect(toHex(encoded)).toBe(vector.frame_hex);
  });

  it.each(vectors.map((v) => [v.name, v] as const))("decodes %s", (_name, vector) => {
    const frame = decodeFrame(fromHex(vector.frame_hex));
    expect(frame.seq).toBe(vector.seq);
    expect(frame.ptsMs).toBe(BigInt(vector.pts_ms));
    expect(toHex(frame.pcm)).toBe(vector.pcm_hex);
  });
});

describe("codec validation", () => {
  it("round-trips arbitrary frames", () => {
    const pcm = new Uint8Array(640).map((_, i) => (i * 31) % 256);
    const frame = { seq: 123456, ptsMs: 987654321n, pcm };
    expect(decodeFrame(encodeFrame(frame))).toEqual(frame);
  });

  it("rejects odd payloads", () => {
    expect(() => encodeFrame({ seq: 1, ptsMs: 0n, pcm: new Uint8Array(3) })).toThrow(
      WireError,
    );
  });

  it("rejects unknown type tags", () => {
    const bytes = encodeFrame({ seq: 1, ptsMs: 0n, pcm: new Uint8Array(2) });
    bytes[0] = 0x44;
    expect(() => decodeFrame(bytes)).toThrow(/frame type/);
  });

  it("rejects truncated headers", () => {
    expect(() => decodeFrame(new Uint8Array(5))).toThrow(/shorter/);
  });

  it("rejects oversized payloads", () => {
    const big = new Uint8Array(64 * 1024 + 2);
    expect(() => encodeFrame({ seq: 1, ptsMs: 0n, pcm: big })).toThrow(/exceeds/);
  });
});
