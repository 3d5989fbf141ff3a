import { describe, expect, it } from "vitest";

import {
  CaptureGate,
  FrameBuilder,
  LinearResampler,
  floatTo16BitPcm,
} from "../src/capture.js";
import { FRAME_BYTES, SAMPLES_PER_FRAME } from "../src/wire.js";

function sine(nSamples: number, freq: number, rate: number): Float32Array {
  const out = new Float32Array(nSamples);
  for (let i = 0; i < nSamples; i++) {
    out[i] = 0.5 * Math.sin((2 * Math.PI * freq * i) / rate);
  }
  return out;
}

describe("FrameBuilder", () => {
  it("one second of 16 kHz audio becomes 50 gapless frames", () => {
    const builder = new FrameBuilder();
    const frames = [];
    // Deliver in uneven chunks to prove accumulation works.
    const audio = sine(16000, 440, 16000);
    for (let i = 0; i < audio.length; i += 441) {
      frames.push(...builder.push(audio.subarray(i, i + 441)));
    }
    const last = builder.flush();
    expect(frames.length).toBe(50);
    expect(last).toBeNull(); // 16000 divides evenly into 320-sample frames
    expect(frames.map((f) => f.seq)).toEqual(
      Array.from({ length: 50 }, (_, i) => i + 1),
    );
    expect(frames.every((f) => f.pcm.length === FRAME_BYTES)).toBe(true);
    expect(frames.map((f) => f.ptsMs)).toEqual(
      Array.from({ length: 50 }, (_, i) => BigInt(i * 20)),
    );
  });

  it("flush emits the short tail frame", () => {
    const builder = new FrameBuilder();
    builder.push(new Float32Array(SAMPLES_PER_FRAME + 100));
    const tail = builder.flush();
    expect(tail).not.toBeNull();
    expect(tail!.seq).toBe(2);
    expect(tail!.pcm.length).toBe(200);
  });
});

describe("LinearResampler", () => {
  it("48 kHz input comes out at 16 kHz", () => {
    const resampler = new LinearResampler(48000);
    const builder = new FrameBuilder();
    const frames = [];
    const audio = sine(48000, 440, 48000); // 1 s at the device rate
    for (let i = 0; i < audio.length; i += 480) {
      frames.push(...builder.push(resampler.push(audio.subarray(i, i + 480))));
    }
    const tail = builder.flush();
    const totalSamples =
      frames.length * SAMPLES_PER_FRAME + (tail ? tail.pcm.length / 2 : 0);
    expect(Math.abs(totalSamples - 16000)).toBeLessThanOrEqual(3);
    expect(frames.length).toBeGreaterThanOrEqual(49);
  });

  it("is phase-continuous across chunk boundaries", () => {
    const whole = new LinearResampler(48000);
    const chunked = new LinearResampler(48000);
    const audio = sine(4800, 200, 48000);
    const a = whole.push(audio);
    const parts: number[] = [];
    for (let i = 0; i < audio.length; i += 137) {
      parts.push(...chunked.push(audio.subarray(i, i + 137)));
    }
    expect(parts.length).toBe(a.length);
    for (let i = 0; i < a.length; i++) {
      expect(Math.abs(parts[i]! - a[i]!)).toBeLessThan(1e-6);
    }
  });

  it("16 kHz passes through untouched", () => {
    const resampler = new LinearResampler(16000);
    const audio = sine(320, 440, 16000);
    expect(Array.from(resampler.push(audio))).toEqual(Array.from(audio));
  });
});

describe("floatTo16BitPcm", () => {
  it("clamps and scales symmetric extremes", () => {
    const pcm = floatTo16BitPcm(Float32Array.from([1.5, 1.0, 0.0, -1.0, -2.0]));
    const view = new DataView(pcm.buffer);
    expect(view.getInt16(0, true)).toBe(0x7fff);
    expect(view.getInt16(2, true)).toBe(0x7fff);
    expect(view.getInt16(4, true)).toBe(0);
    expect(view.getInt16(6, true)).toBe(-0x8000);
    expect(view.getInt16(8, true)).toBe(-0x8000);
  });
});

describe("CaptureGate", () => {
  it("push-to-talk opens only while held", () => {
    const gate = new CaptureGate();
    expect(gate.isOpen).toBe(false);
    gate.pressTalk();
    expect(gate.isOpen).toBe(true);
    expect(gate.releaseTalk()).toBe(true);
    expect(gate.isOpen).toBe(false);
    expect(gate.releaseTalk()).toBe(false); // no utterance was open
  });

  it("open mic stays open", () => {
    const gate = new CaptureGate("open_mic");
    expect(gate.isOpen).toBe(true);
  });
});

describe("multi-utterance sessions", () => {
  it("seq stays gapless across utterances with one builder", () => {
    const builder = new FrameBuilder();
    const first = builder.push(new Float32Array(SAMPLES_PER_FRAME * 3));
    builder.flush();
    const second = builder.push(new Float32Array(SAMPLES_PER_FRAME * 2));
    const seqs = [...first, ...second].map((f) => f.seq);
    expect(seqs).toEqual([1, 2, 3, 4, 5]);
  });
});
