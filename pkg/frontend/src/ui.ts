/**
 * Browser glue: microphone capture via an AudioWorklet, playback through
 * an AudioContext, push-to-talk and barge-in buttons, live transcript
 * and a metrics panel that renders session.metrics verbatim.
 */

import { CaptureGate, FrameBuilder, LinearResampler } from "./capture.js";
import { PlaybackScheduler } from "./playback.js";
import { VoiceSessionClient, sessionUrl } from "./session.js";
import { SAMPLE_RATE } from "./wire.js";

const WORKLET_SOURCE = `
class CaptureProcessor extends AudioWorkletProcessor {
  process(inputs) {
    const channel = inputs[0] && inputs[0][0];
    if (channel && channel.length) {
      const copy = new Float32Array(channel.length);
      copy.set(channel);
      this.port.postMessage(copy, [copy.buffer]);
    }
    return true;
  }
}
registerProcessor("voiceclone-capture", CaptureProcessor);
`;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function startApp(): Promise<void> {
  const statusEl = el<HTMLSpanElement>("status");
  const transcriptEl = el<HTMLPreElement>("transcript");
  const metricsEl = el<HTMLPreElement>("metrics");
  const talkButton = el<HTMLButtonElement>("talk");
  const bargeButton = el<HTMLButtonElement>("barge");
  const connectButton = el<HTMLButtonElement>("connect");
  const serverInput = el<HTMLInputElement>("server");
  const playbookInput = el<HTMLInputElement>("playbook");
  const adapterSelect = el<HTMLSelectElement>("adapter");
  const openMicToggle = el<HTMLInputElement>("openmic");

  const audioContext = new AudioContext({ sampleRate: SAMPLE_RATE });
  let playheadAt = 0;
  let activeSources: AudioBufferSourceNode[] = [];
  const stopAllSources = () => {
    for (const source of activeSources) {
      try {
        source.stop();
        source.disconnect();
      } catch {
        // already stopped
      }
    }
    activeSources = [];
    playheadAt = 0;
  };
  const scheduler = new PlaybackScheduler((pcm) => {
    const samples = new Int16Array(pcm.buffer, pcm.byteOffset, pcm.length / 2);
    const floats = new Float32Array(samples.length);
    for (let i = 0; i < samples.length; i++) floats[i] = samples[i]! / 32768;
    const buffer = audioContext.createBuffer(1, floats.length, SAMPLE_RATE);
    buffer.getChannelData(0).set(floats);
    const source = audioContext.createBufferSource();
    source.buffer = buffer;
    source.connect(audioContext.destination);
    source.onended = () => {
      activeSources = activeSources.filter((s) => s !== source);
    };
    activeSources.push(source);
    const startAt = Math.max(audioContext.currentTime + 0.02, playheadAt);
    source.start(startAt);
    playheadAt = startAt + buffer.duration;
  });
  setInterval(() => scheduler.tick(), 10);

  const session = new VoiceSessionClient(scheduler, {
    onStateChange: (state) => (statusEl.textContent = state),
    onTranscript: (full) => (transcriptEl.textContent = full),
    onMetrics: (metrics) => (metricsEl.textContent = JSON.stringify(metrics, null, 2)),
    onServerCancel: stopAllSources,
    onError: (code, message) => (statusEl.textContent = `error: ${code} ${message}`),
  });

  const gate = new CaptureGate(openMicToggle.checked ? "open_mic" : "push_to_talk");
  openMicToggle.onchange = () => {
    gate.mode = openMicToggle.checked ? "open_mic" : "push_to_talk";
  };

  // One builder for the whole session: frame seq must stay gapless across
  // utterances, so it is never reset while connected.
  const builder = new FrameBuilder();
  let resampler: LinearResampler | null = null;

  connectButton.onclick = async () => {
    let stream: MediaStream;
    try {
      stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    } catch (err) {
      statusEl.textContent = "microphone permission denied";
      return; // visible error state; no retry loop
    }
    const captureContext = new AudioContext();
    resampler = new LinearResampler(captureContext.sampleRate, SAMPLE_RATE);
    const workletUrl = URL.createObjectURL(
      new Blob([WORKLET_SOURCE], { type: "application/javascript" }),
    );
    await captureContext.audioWorklet.addModule(workletUrl);
    const sourceNode = captureContext.createMediaStreamSource(stream);
    const workletNode = new AudioWorkletNode(captureContext, "voiceclone-capture");
    sourceNode.connect(workletNode);
    workletNode.port.onmessage = (event: MessageEvent<Float32Array>) => {
      if (!gate.isOpen || session.state !== "connected" || !resampler) return;
      for (const frame of builder.push(resampler.push(event.data))) {
        session.sendAudioFrame(frame);
      }
    };

    const url = sessionUrl(
      serverInput.value,
      playbookInput.value,
      adapterSelect.value,
    );
    const socket = new WebSocket(url);
    socket.binaryType = "arraybuffer";
    session.attach({
      send: (data) => socket.send(data),
      close: () => socket.close(),
    });
    socket.onopen = () => session.markConnected();
    socket.onclose = () => session.markClosed();
    socket.onerror = () => session.markError();
    socket.onmessage = (event) => {
      if (typeof event.data === "string") {
        session.handleMessage(event.data);
      } else {
        session.handleMessage(new Uint8Array(event.data as ArrayBuffer));
      }
    };
  };

  talkButton.onpointerdown = () => gate.pressTalk();
  talkButton.onpointerup = () => {
    if (gate.releaseTalk()) {
      const last = builder.flush();
      if (last) session.sendAudioFrame(last);
      session.endUtterance();
    }
  };

  bargeButton.onclick = () => {
    if (session.bargeIn()) {
      stopAllSources();
    }
  };
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  void startApp();
}
