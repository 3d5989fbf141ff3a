/**
 * Microphone capture pipeline: resample whatever rate the device delivers
 * down to 16 kHz mono, then cut gapless 20 ms frames with sequence
 * numbers starting at 1. The DSP here is pure and runs headless; the
 * browser glue (getUserMedia + AudioWorklet) lives in ui.ts.
 */

import {
  AudioFrame,
  FRAME_MS,
  SAMPLES_PER_FRAME,
  SAMPLE_RATE,
} from "./wire.js";

/** Streaming linear resampler; keeps phase across push() calls. */
export class LinearResampler {
  private readonly ratio: number;
  private position = 0; // fractional read position into the virtual input stream
  private tail: number | null = null; // last sample of the previous chunk
  private consumed = 0; // input samples fully consumed so far

  constructor(fromRate: number, toRate: number = SAMPLE_RATE) {
    if (fromRate <= 0 || toRate <= 0) {
      throw new Error("sample rates must be positive");
    }
    this.ratio = fromRate / toRate;
  }

  push(input: Float32Array): Float32Array {
    if (this.ratio === 1) {
      return input.slice();
    }
    const out: number[] = [];
    const start = this.consumed;
    const end = start + input.length;
    const at = (index: number): number => {
      if (index >= start) return input[index - start] ?? 0;
      return this.tail ?? input[0] ?? 0;
    };
    while (this.position + 1 < end) {
      const base = Math.floor(this.position);
      const frac = this.position - base;
      const a = at(base);
      const b = at(base + 1);
      out.push(a + (b - a) * frac);
      this.position += this.ratio;
    }
    this.consumed = end;
    this.tail = input.length > 0 ? input[input.length - 1]! : this.tail;
    return Float32Array.from(out);
  }
}

export function floatTo16BitPcm(samples: Float32Array): Uint8Array {
  const out = new Uint8Array(samples.length * 2);
  const view = new DataView(out.buffer);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]!));
    view.setInt16(i * 2, clamped < 0 ? clamped * 0x8000 : clamped * 0x7fff, true);
  }
  return out;
}

/**
 * Accumulates 16 kHz samples and emits exact 20 ms frames. Sequence
 * numbers are gapless starting at 1; pts is the capture timeline in ms.
 */
export class FrameBuilder {
  private pending: number[] = [];
  private nextSeq = 1;

  push(samples: Float32Array): AudioFrame[] {
    for (let i = 0; i < samples.length; i++) {
      this.pending.push(samples[i]!);
    }
    const frames: AudioFrame[] = [];
    while (this.pending.length >= SAMPLES_PER_FRAME) {
      const chunk = Float32Array.from(this.pending.splice(0, SAMPLES_PER_FRAME));
      frames.push(this.makeFrame(floatTo16BitPcm(chunk)));
    }
    return frames;
  }

  /** Emit any remainder as a final short frame (end of utterance). */
  flush(): AudioFrame | null {
    if (this.pending.length === 0) {
      return null;
    }
    const chunk = Float32Array.from(this.pending.splice(0));
    return this.makeFrame(floatTo16BitPcm(chunk));
  }

  private makeFrame(pcm: Uint8Array): AudioFrame {
    const frame: AudioFrame = {
      seq: this.nextSeq,
      ptsMs: BigInt(this.nextSeq - 1) * BigInt(FRAME_MS),
      pcm,
    };
    this.nextSeq += 1;
    return frame;
  }

  get framesEmitted(): number {
    return this.nextSeq - 1;
  }
}

export type CaptureMode = "push_to_talk" | "open_mic";

/**
 * Capture gating. Push-to-talk is the default: samples flow only while
 * the talk key is held, and releasing it marks the end of the utterance.
 */
export class CaptureGate {
  private talking = false;

  constructor(public mode: CaptureMode = "push_to_talk") {}

  pressTalk(): void {
    this.talking = true;
  }

  /** Returns true if an utterance was open (caller should send audio.end). */
  releaseTalk(): boolean {
    const wasTalking = this.talking;
    this.talking = false;
    return wasTalking;
  }

  get isOpen(): boolean {
    return this.mode === "open_mic" || this.talking;
  }
}
