import { describe, expect, it } from "vitest";

import { JitterBuffer, PlaybackScheduler } from "../src/playback.js";
import { AudioFrame, FRAME_BYTES } from "../src/wire.js";

function frame(seq: number, fill = seq % 256): AudioFrame {
  return {
    seq,
    ptsMs: BigInt((seq - 1) * 20),
    pcm: new Uint8Array(FRAME_BYTES).fill(fill),
  };
}

describe("JitterBuffer", () => {
  it("pre-buffers to the 60 ms target before releasing audio", () => {
    const buffer = new JitterBuffer();
    buffer.push(frame(1));
    expect(buffer.pop()).toBeNull();
    buffer.push(frame(2));
    expect(buffer.pop()).toBeNull();
    buffer.push(frame(3)); // 60 ms reached
    expect(buffer.pop()!.seq).toBe(1);
  });

  it("reorders frames arriving out of order within the window", () => {
    const buffer = new JitterBuffer();
    buffer.push(frame(1));
    buffer.push(frame(3));
    buffer.push(frame(2));
    const order = [buffer.pop()!.seq, buffer.pop()!.seq, buffer.pop()!.seq];
    expect(order).toEqual([1, 2, 3]);
    expect(buffer.gaps).toBe(0);
  });

  it("logs a gap and continues from the next frame", () => {
    const buffer = new JitterBuffer();
    for (const seq of [1, 2, 4, 5, 6]) {
      buffer.push(frame(seq));
    }
    const delivered: number[] = [];
    for (;;) {
      const next = buffer.pop();
      if (!next) break;
      delivered.push(next.seq);
    }
    expect(delivered).toEqual([1, 2, 4, 5, 6]);
    expect(buffer.gaps).toBe(1);
  });

  it("drops late and duplicate frames", () => {
    const buffer = new JitterBuffer({ targetMs: 20 });
    buffer.push(frame(1));
    buffer.push(frame(1));
    expect(buffer.size).toBe(1);
    expect(buffer.pop()!.seq).toBe(1);
    buffer.push(frame(1)); // already delivered
    expect(buffer.late).toBe(1);
    expect(buffer.size).toBe(0);
  });

  it("flush empties the buffer and reports depth 0", () => {
    const buffer = new JitterBuffer();
    for (let seq = 1; seq <= 5; seq++) buffer.push(frame(seq));
    expect(buffer.depthMs()).toBe(100);
    const dropped = buffer.flush();
    expect(dropped).toBe(5);
    expect(buffer.depthMs()).toBe(0);
    expect(buffer.pop()).toBeNull();
  });
});

describe("PlaybackScheduler", () => {
  it("plays frames in order with no underruns when fed in order", () => {
    let now = 0;
    const played: number[] = [];
    const scheduler = new PlaybackScheduler(
      (pcm) => played.push(pcm[0]!),
      () => now,
    );
    for (let seq = 1; seq <= 10; seq++) scheduler.onFrame(frame(seq, seq));
    for (; now <= 300; now += 10) scheduler.tick();
    expect(played).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    expect(scheduler.stats.underruns).toBe(0);
    expect(scheduler.stats.gaps).toBe(0);
  });

  it("paces delivery with the clock", () => {
    let now = 0;
    const played: number[] = [];
    const scheduler = new PlaybackScheduler(
      (pcm) => played.push(pcm[0]!),
      () => now,
    );
    for (let seq = 1; seq <= 6; seq++) scheduler.onFrame(frame(seq, seq));
    scheduler.tick(); // t=0: first pop starts the timeline
    const atStart = played.length;
    now = 40;
    scheduler.tick();
    expect(played.length).toBeGreaterThan(atStart);
    expect(played.length).toBeLessThan(6); // not everything at once
  });

  it("cancel flushes to depth 0 immediately (within one frame duration)", () => {
    let now = 0;
    const scheduler = new PlaybackScheduler(
      () => {},
      () => now,
    );
    for (let seq = 1; seq <= 8; seq++) scheduler.onFrame(frame(seq));
    expect(scheduler.depthMs()).toBe(160);
    scheduler.cancel();
    expect(scheduler.depthMs()).toBe(0);
  });

  it("audio arriving after a cancel plays normally", () => {
    let now = 0;
    const played: number[] = [];
    const scheduler = new PlaybackScheduler(
      (pcm) => played.push(pcm[0]!),
      () => now,
    );
    for (let seq = 1; seq <= 4; seq++) scheduler.onFrame(frame(seq, seq));
    scheduler.cancel();
    for (let seq = 5; seq <= 8; seq++) scheduler.onFrame(frame(seq, seq));
    for (; now <= 200; now += 10) scheduler.tick();
    expect(played).toEqual([5, 6, 7, 8]);
  });
});

describe("end-of-turn drain", () => {
  it("plays a reply shorter than the jitter target after drain", () => {
    const buffer = new JitterBuffer();
    buffer.push(frame(1));
    buffer.push(frame(2)); // 40 ms < 60 ms target
    expect(buffer.pop()).toBeNull();
    buffer.drain();
    expect(buffer.pop()!.seq).toBe(1);
    expect(buffer.pop()!.seq).toBe(2);
    expect(buffer.pop()).toBeNull();
  });

  it("drain releases a trailing gap hold", () => {
    const buffer = new JitterBuffer();
    for (const seq of [1, 2, 3, 5]) buffer.push(frame(seq));
    expect(buffer.pop()!.seq).toBe(1);
    expect(buffer.pop()!.seq).toBe(2);
    expect(buffer.pop()!.seq).toBe(3);
    expect(buffer.pop()).toBeNull(); // waiting for seq 4
    buffer.drain();
    expect(buffer.pop()!.seq).toBe(5);
    expect(buffer.gaps).toBe(1);
  });

  it("new audio after a drain pre-buffers the next turn normally", () => {
    const buffer = new JitterBuffer();
    buffer.push(frame(1));
    buffer.drain();
    expect(buffer.pop()!.seq).toBe(1);
    buffer.push(frame(2));
    // started stays true within a session, so the next turn flows
    expect(buffer.pop()!.seq).toBe(2);
  });
});
