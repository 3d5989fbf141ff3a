/**
 * Agent audio playback: a seq-ordered jitter buffer (default 60 ms)
 * feeding an injectable sink. Frames arriving out of order inside the
 * buffer window are reordered; a missing seq is skipped (and counted)
 * once the buffer is full enough to keep playing. playback.cancel maps
 * to flush(), which empties the buffer synchronously, well inside the
 * one-frame-duration bound.
 */

import { AudioFrame, BYTES_PER_MS, FRAME_MS } from "./wire.js";

export interface JitterBufferOptions {
  targetMs?: number;
  frameMs?: number;
}

export class JitterBuffer {
  readonly targetMs: number;
  readonly frameMs: number;
  private queue: AudioFrame[] = [];
  private lastDelivered = 0;
  private started = false;
  private draining = false;
  gaps = 0;
  late = 0;

  constructor(options: JitterBufferOptions = {}) {
    this.targetMs = options.targetMs ?? 60;
    this.frameMs = options.frameMs ?? FRAME_MS;
  }

  depthMs(): number {
    let bytes = 0;
    for (const frame of this.queue) {
      bytes += frame.pcm.length;
    }
    return bytes / BYTES_PER_MS;
  }

  get size(): number {
    return this.queue.length;
  }

  push(frame: AudioFrame): void {
    if (frame.seq <= this.lastDelivered) {
      this.late += 1;
      return;
    }
    this.draining = false; // new audio begins a fresh stream segment
    let index = this.queue.length;
    while (index > 0 && this.queue[index - 1]!.seq > frame.seq) {
      index -= 1;
    }
    if (index > 0 && this.queue[index - 1]!.seq === frame.seq) {
      return; // duplicate
    }
    this.queue.splice(index, 0, frame);
  }

  /** Next frame in order, or null while pre-buffering / waiting on a gap. */
  pop(): AudioFrame | null {
    if (!this.started) {
      if (!this.draining && this.depthMs() < this.targetMs) {
        return null;
      }
      this.started = true;
    }
    const head = this.queue[0];
    if (!head) {
      return null;
    }
    if (this.lastDelivered > 0 && head.seq !== this.lastDelivered + 1) {
      // Hold out for the missing frame until the buffer is at target,
      // then log the gap and continue from the next frame we do have.
      if (!this.draining && this.depthMs() < this.targetMs) {
        return null;
      }
      this.gaps += head.seq - this.lastDelivered - 1;
    }
    this.queue.shift();
    this.lastDelivered = head.seq;
    return head;
  }

  /**
   * End of the agent's turn: no more frames are coming for this segment,
   * so release the pre-buffer gate and any gap holds. Replies shorter
   * than the jitter target would otherwise never play.
   */
  drain(): void {
    this.draining = true;
  }

  /** Drop everything buffered (playback.cancel); depth becomes 0 now. */
  flush(): number {
    const dropped = this.queue.length;
    this.queue = [];
    this.started = false;
    this.draining = false;
    return dropped;
  }
}

export type PcmSink = (pcm: Uint8Array, ptsMs: bigint) => void;

/**
 * Pops due frames from the jitter buffer into the sink. The clock is
 * injectable so headless tests can drive time; the browser glue calls
 * tick() from a short interval timer.
 */
export class PlaybackScheduler {
  private buffer: JitterBuffer;
  private sink: PcmSink;
  private clock: () => number;
  private nextDueAt: number | null = null;
  private stalled = false;
  private underruns = 0;

  constructor(
    sink: PcmSink,
    clock: () => number = () => performance.now(),
    options: JitterBufferOptions = {},
  ) {
    this.buffer = new JitterBuffer(options);
    this.sink = sink;
    this.clock = clock;
  }

  onFrame(frame: AudioFrame): void {
    // An underrun is audio arriving after the timeline already ran dry
    // mid-stream; a stream simply ending does not count.
    if (this.stalled) {
      this.underruns += 1;
      this.stalled = false;
    }
    this.buffer.push(frame);
  }

  /** Deliver every frame that is due at the current clock reading. */
  tick(): number {
    const now = this.clock();
    let delivered = 0;
    for (;;) {
      if (this.nextDueAt !== null && now < this.nextDueAt) {
        return delivered;
      }
      const frame = this.buffer.pop();
      if (frame === null) {
        if (this.nextDueAt !== null && now >= this.nextDueAt && this.buffer.size === 0) {
          this.stalled = true;
        }
        return delivered;
      }
      this.sink(frame.pcm, frame.ptsMs);
      delivered += 1;
      const durationMs = frame.pcm.length / BYTES_PER_MS;
      this.nextDueAt = (this.nextDueAt ?? now) + durationMs;
      if (this.nextDueAt < now) {
        this.nextDueAt = now;
      }
    }
  }

  /** End-of-turn signal: play out whatever is buffered without waiting. */
  drain(): void {
    this.buffer.drain();
  }

  /** Local flush for barge-in / playback.cancel. Immediate. */
  cancel(): number {
    this.nextDueAt = null;
    this.stalled = false;
    return this.buffer.flush();
  }

  depthMs(): number {
    return this.buffer.depthMs();
  }

  get stats(): { gaps: number; late: number; underruns: number } {
    return {
      gaps: this.buffer.gaps,
      late: this.buffer.late,
      underruns: this.underruns,
    };
  }
}
