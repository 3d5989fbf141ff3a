/**
 * Binary frame codec and control message types for the gateway protocol.
 *
 * Frame layout: 1-byte type tag (0x01 audio), u32 big-endian sequence
 * number, u64 big-endian presentation timestamp (ms), then 16-bit LE
 * mono PCM at 16 kHz. Payloads are even-length and at most 64 KiB.
 */

export const FRAME_TYPE_AUDIO = 0x01;
export const HEADER_SIZE = 13;

export const SAMPLE_RATE = 16000;
export const FRAME_MS = 20;
export const BYTES_PER_MS = 32;
export const FRAME_BYTES = FRAME_MS * BYTES_PER_MS; // 640
export const SAMPLES_PER_FRAME = FRAME_BYTES / 2; // 320
export const MAX_PAYLOAD = 64 * 1024;

export interface AudioFrame {
  seq: number;
  ptsMs: bigint;
  pcm: Uint8Array;
}

export class WireError extends Error {}

export function encodeFrame(frame: AudioFrame): Uint8Array {
  if (!Number.isInteger(frame.seq) || frame.seq < 0 || frame.seq > 0xffffffff) {
    throw new WireError(`seq ${frame.seq} out of u32 range`);
  }
  if (frame.ptsMs < 0n || frame.ptsMs > 0xffffffffffffffffn) {
    throw new WireError(`ptsMs ${frame.ptsMs} out of u64 range`);
  }
  if (frame.pcm.length % 2 !== 0) {
    throw new WireError("payload length is odd");
  }
  if (frame.pcm.length > MAX_PAYLOAD) {
    throw new WireError(`payload exceeds ${MAX_PAYLOAD} bytes`);
  }
  const out = new Uint8Array(HEADER_SIZE + frame.pcm.length);
  const view = new DataView(out.buffer);
  view.setUint8(0, FRAME_TYPE_AUDIO);
  view.setUint32(1, frame.seq, false);
  view.setBigUint64(5, frame.ptsMs, false);
  out.set(frame.pcm, HEADER_SIZE);
  return out;
}

export function decodeFrame(data: Uint8Array): AudioFrame {
  if (data.length < HEADER_SIZE) {
    throw new WireError("frame shorter than header");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const tag = view.getUint8(0);
  if (tag !== FRAME_TYPE_AUDIO) {
    throw new WireError(`unknown frame type 0x${tag.toString(16)}`);
  }
  const pcm = data.slice(HEADER_SIZE);
  if (pcm.length % 2 !== 0) {
    throw new WireError("payload length is odd");
  }
  if (pcm.length > MAX_PAYLOAD) {
    throw new WireError(`payload exceeds ${MAX_PAYLOAD} bytes`);
  }
  return {
    seq: view.getUint32(1, false),
    ptsMs: view.getBigUint64(5, false),
    pcm,
  };
}

/** Server -> client control messages (JSON text frames). */
export type ServerMessage =
  | { type: "agent.transcript.delta"; text: string }
  | { type: "agent.turn.complete" }
  | { type: "playback.cancel" }
  | { type: "session.end" }
  | {
      type: "session.metrics";
      first_response_latency_ms: number | null;
      turn_latencies_ms: number[];
      p50_latency_ms: number;
      p95_latency_ms: number;
      rtf: number;
      frames_in: number;
      frames_out: number;
      frames_dropped: number;
    }
  | { type: "error"; code: string; message: string }
  | { type: "warning"; code: string; message: string };

export type ClientControl =
  | { type: "session.start"; playbook_id: string; adapter?: string; scenario?: string }
  | { type: "audio.end" }
  | { type: "barge_in" }
  | { type: "session.close" };

export function parseServerMessage(text: string): ServerMessage {
  const data = JSON.parse(text) as { type?: unknown };
  if (typeof data.type !== "string") {
    throw new WireError("server message without a type");
  }
  return data as ServerMessage;
}
