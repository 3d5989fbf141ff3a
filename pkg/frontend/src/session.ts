/**
 * Client session: one live call against the gateway websocket.
 *
 * Transport-agnostic: anything with send/close and message callbacks
 * works (browser WebSocket or the ws package in node tests). Incoming
 * binary frames go to the playback scheduler; transcript deltas append
 * to an append-only transcript; the metrics message is stored verbatim
 * for display with no client-side recomputation.
 *
 * Barge-in: allowed only while the agent is audibly speaking; sends
 * {"type":"barge_in"} and flushes local playback immediately rather than
 * waiting for the server's playback.cancel. A second press is a no-op.
 */

import {
  AudioFrame,
  ClientControl,
  ServerMessage,
  decodeFrame,
  encodeFrame,
  parseServerMessage,
} from "./wire.js";
import { PlaybackScheduler } from "./playback.js";

export type ConnectionState = "disconnected" | "connecting" | "connected" | "error";

/** Minimal transport surface shared by browser WebSocket and ws. */
export interface SessionSocket {
  send(data: string | Uint8Array): void;
  close(): void;
}

export interface SessionCallbacks {
  onTranscript?: (fullTranscript: string, delta: string) => void;
  onStateChange?: (state: ConnectionState) => void;
  onMetrics?: (metrics: Extract<ServerMessage, { type: "session.metrics" }>) => void;
  onServerCancel?: () => void;
  onTurnComplete?: () => void;
  onSessionEnd?: () => void;
  onError?: (code: string, message: string) => void;
  onAudioFrame?: (frame: AudioFrame) => void;
}

export class VoiceSessionClient {
  state: ConnectionState = "disconnected";
  transcript = "";
  metrics: Extract<ServerMessage, { type: "session.metrics" }> | null = null;
  agentSpeaking = false;

  private socket: SessionSocket | null = null;
  private callbacks: SessionCallbacks;
  readonly playback: PlaybackScheduler;

  constructor(playback: PlaybackScheduler, callbacks: SessionCallbacks = {}) {
    this.playback = playback;
    this.callbacks = callbacks;
  }

  attach(socket: SessionSocket): void {
    this.socket = socket;
    this.setState("connecting");
  }

  markConnected(): void {
    this.setState("connected");
  }

  markError(): void {
    this.setState("error");
  }

  markClosed(): void {
    if (this.state !== "error") {
      this.setState("disconnected");
    }
    this.socket = null;
  }

  /** Feed one raw websocket message (binary frame or JSON text). */
  handleMessage(data: Uint8Array | string): void {
    if (typeof data === "string") {
      this.handleControl(parseServerMessage(data));
      return;
    }
    const frame = decodeFrame(data);
    this.agentSpeaking = true;
    this.playback.onFrame(frame);
    this.callbacks.onAudioFrame?.(frame);
  }

  private handleControl(message: ServerMessage): void {
    switch (message.type) {
      case "agent.transcript.delta":
        this.transcript += message.text;
        this.callbacks.onTranscript?.(this.transcript, message.text);
        break;
      case "agent.turn.complete":
        this.agentSpeaking = false;
        this.playback.drain(); // short replies must play out below the jitter target
        this.callbacks.onTurnComplete?.();
        break;
      case "playback.cancel":
        this.playback.cancel();
        this.agentSpeaking = false;
        this.callbacks.onServerCancel?.();
        break;
      case "session.metrics":
        this.metrics = message;
        this.callbacks.onMetrics?.(message);
        break;
      case "session.end":
        this.callbacks.onSessionEnd?.();
        break;
      case "error":
        this.setState("error");
        this.callbacks.onError?.(message.code, message.message);
        break;
      case "warning":
        break; // advisory only
    }
  }

  sendAudioFrame(frame: AudioFrame): void {
    this.requireSocket().send(encodeFrame(frame));
  }

  sendControl(control: ClientControl): void {
    this.requireSocket().send(JSON.stringify(control));
  }

  endUtterance(): void {
    this.sendControl({ type: "audio.end" });
  }

  /**
   * Barge-in press. Only acts while the agent is speaking (audio queued
   * locally or a turn still open); flushes playback locally right away
   * and tells the server. Returns true if a message was sent.
   */
  bargeIn(): boolean {
    if (!this.agentSpeaking && this.playback.depthMs() === 0) {
      return false;
    }
    this.playback.cancel();
    this.agentSpeaking = false;
    this.sendControl({ type: "barge_in" });
    return true;
  }

  closeSession(): void {
    if (this.socket) {
      this.sendControl({ type: "session.close" });
    }
  }

  private requireSocket(): SessionSocket {
    if (!this.socket) {
      throw new Error("session is not attached to a socket");
    }
    return this.socket;
  }

  private setState(state: ConnectionState): void {
    if (this.state !== state) {
      this.state = state;
      this.callbacks.onStateChange?.(state);
    }
  }
}

export function sessionUrl(
  base: string,
  playbookId: string,
  adapter: string,
  scenario?: string,
): string {
  const url = new URL("/v1/session", base);
  if (url.protocol === "http:") url.protocol = "ws:";
  if (url.protocol === "https:") url.protocol = "wss:";
  url.searchParams.set("playbook_id", playbookId);
  url.searchParams.set("adapter", adapter);
  if (scenario) {
    url.searchParams.set("scenario", scenario);
  }
  return url.toString();
}
