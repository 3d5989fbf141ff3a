/**
 * End-to-end loopback against the real gateway: spawns the Python server,
 * streams framed audio over a live websocket, and checks the echo comes
 * back byte-identical. Also exercises a live barge-in press: the local
 * playback buffer must flush to zero within 20 ms of the action.
 */

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import { performance } from "node:perf_hooks";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { FrameBuilder } from "../src/capture.js";
import { PlaybackScheduler } from "../src/playback.js";
import { VoiceSessionClient, sessionUrl } from "../src/session.js";
import { AudioFrame, ServerMessage } from "../src/wire.js";

const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));
const PORT = 18000 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForHealthy(timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("gateway did not become healthy in time");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-m",
      "voiceclone.cli",
      "serve",
      "--playbook-dir",
      `${REPO_ROOT}fixtures/golden`,
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealthy();
}, 30_000);

afterAll(() => {
  server?.kill();
});

interface LiveSession {
  session: VoiceSessionClient;
  scheduler: PlaybackScheduler;
  socket: WebSocket;
  received: AudioFrame[];
  events: ServerMessage["type"][];
  waitFor(type: ServerMessage["type"], timeoutMs?: number): Promise<void>;
  waitForAudioFrames(n: number, timeoutMs?: number): Promise<void>;
}

function connect(adapter: string, scenario?: string): Promise<LiveSession> {
  return new Promise((resolve, reject) => {
    const received: AudioFrame[] = [];
    const events: ServerMessage["type"][] = [];
    const waiters: (() => void)[] = [];
    const scheduler = new PlaybackScheduler(
      () => {},
      () => performance.now(),
    );
    const session = new VoiceSessionClient(scheduler, {
      onAudioFrame: (frame) => {
        received.push(frame);
        waiters.splice(0).forEach((wake) => wake());
      },
    });
    const url = sessionUrl(BASE, "playbook", adapter, scenario);
    const socket = new WebSocket(url);
    socket.binaryType = "nodebuffer";
    socket.on("open", () => {
      session.attach({
        send: (data) => socket.send(data),
        close: () => socket.close(),
      });
      session.markConnected();
      resolve({
        session,
        scheduler,
        socket,
        received,
        events,
        waitFor(type, timeoutMs = 10_000) {
          return new Promise<void>((ok, bad) => {
            const check = () => events.includes(type);
            if (check()) return ok();
            const timer = setInterval(() => {
              if (check()) {
                clearInterval(timer);
                ok();
              } else if (performance.now() > start + timeoutMs) {
                clearInterval(timer);
                bad(new Error(`timed out waiting for ${type}`));
              }
            }, 10);
            const start = performance.now();
          });
        },
        waitForAudioFrames(n, timeoutMs = 10_000) {
          return new Promise<void>((ok, bad) => {
            const start = performance.now();
            const timer = setInterval(() => {
              if (received.length >= n) {
                clearInterval(timer);
                ok();
              } else if (performance.now() > start + timeoutMs) {
                clearInterval(timer);
                bad(new Error(`only ${received.length}/${n} frames arrived`));
              }
            }, 5);
          });
        },
      });
    });
    socket.on("message", (data, isBinary) => {
      if (isBinary) {
        session.handleMessage(new Uint8Array(data as Buffer));
      } else {
        const text = data.toString();
        events.push((JSON.parse(text) as { type: ServerMessage["type"] }).type);
        session.handleMessage(text);
      }
    });
    socket.on("error", reject);
  });
}

describe("echo loopback against the live gateway", () => {
  it("returns the streamed second of audio byte-identical", async () => {
    const live = await connect("echo");
    const builder = new FrameBuilder();
    const audio = new Float32Array(16000);
    for (let i = 0; i < audio.length; i++) {
      audio[i] = 0.4 * Math.sin((2 * Math.PI * 440 * i) / 16000);
    }
    const frames = builder.push(audio);
    expect(frames.length).toBe(50);
    const sentBytes: number[] = [];
    for (const frame of frames) {
      live.session.sendAudioFrame(frame);
      sentBytes.push(...frame.pcm);
    }
    live.session.endUtterance();
    await live.waitFor("agent.turn.complete");

    const receivedBytes: number[] = [];
    for (const frame of live.received) {
      receivedBytes.push(...frame.pcm);
    }
    expect(live.received.map((f) => f.seq)).toEqual(
      Array.from({ length: 50 }, (_, i) => i + 1),
    );
    expect(receivedBytes).toEqual(sentBytes);

    // A second utterance must continue the seq space without a gap.
    const more = builder.push(new Float32Array(320 * 5).fill(0.1));
    for (const extra of more) {
      live.session.sendAudioFrame(extra);
    }
    live.session.endUtterance();
    await live.waitForAudioFrames(55);

    live.session.closeSession();
    await live.waitFor("session.metrics");
    expect(live.session.metrics?.frames_in).toBe(55);
    expect(live.session.metrics?.frames_dropped).toBe(0);
    live.socket.close();
  }, 20_000);
});

describe("live barge-in", () => {
  it("flushes the playback buffer to zero within 20 ms of the press", async () => {
    const live = await connect("scripted", "happy_path");
    const builder = new FrameBuilder();
    const [frame] = builder.push(new Float32Array(320));
    live.session.sendAudioFrame(frame!);
    live.session.endUtterance();

    await live.waitForAudioFrames(4);
    expect(live.scheduler.depthMs()).toBeGreaterThan(0);

    const pressedAt = performance.now();
    const acted = live.session.bargeIn();
    const flushedAt = performance.now();
    expect(acted).toBe(true);
    expect(live.scheduler.depthMs()).toBe(0);
    expect(flushedAt - pressedAt).toBeLessThan(20);

    live.socket.close();
  }, 20_000);
});
