/**
 * Recording-side event capture. The session buffer is the only mutable
 * recording state: every gesture appends exactly one event stamped with
 * the recording clock (anchored to audio-capture start, which keeps audio
 * and events on a single timebase by construction), and batches flush to
 * the server every 500 ms or 50 events, whichever comes first.
 */

import { ApiClient } from "./api.js";
import { ActionEvent, EventPayload } from "./wire.js";

export interface RecordingClock {
  /** Milliseconds since recording start. */
  elapsedMs(): number;
}

export class PerformanceClock implements RecordingClock {
  private startedAt = 0;

  start(): void {
    this.startedAt = performance.now();
  }

  elapsedMs(): number {
    return Math.max(0, Math.round(performance.now() - this.startedAt));
  }
}

/** Microphone capture behind an interface so tests can stub the browser API. */
export interface AudioCapture {
  start(): Promise<void>;
  stop(): Promise<Uint8Array>;
}

export class MediaRecorderCapture implements AudioCapture {
  private recorder: MediaRecorder | null = null;
  private chunks: Blob[] = [];

  async start(): Promise<void> {
    const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.chunks = [];
    this.recorder = new MediaRecorder(stream);
    this.recorder.ondataavailable = (e) => {
      if (e.data.size > 0) this.chunks.push(e.data);
    };
    this.recorder.start(1000);
  }

  async stop(): Promise<Uint8Array> {
    const recorder = this.recorder;
    if (!recorder) return new Uint8Array();
    await new Promise<void>((resolve) => {
      recorder.onstop = () => resolve();
      recorder.stop();
    });
    recorder.stream.getTracks().forEach((t) => t.stop());
    const blob = new Blob(this.chunks);
    return new Uint8Array(await blob.arrayBuffer());
  }
}

export const FLUSH_INTERVAL_MS = 500;
export const FLUSH_BATCH_SIZE = 50;

export class UiSessionBuffer {
  private pending: ActionEvent[] = [];
  private nextSeq = 0;
  private lastAt = 0;
  private inFlight: Promise<void> = Promise.resolve();

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
    private readonly clock: RecordingClock,
  ) {}

  get seqCount(): number {
    return this.nextSeq;
  }

  /** Append one gesture as one event; timestamps never run backwards. */
  capture(payload: EventPayload): ActionEvent {
    const at = Math.max(this.clock.elapsedMs(), this.lastAt);
    const event: ActionEvent = { seq: this.nextSeq, at, payload };
    this.nextSeq += 1;
    this.lastAt = at;
    this.pending.push(event);
    if (this.pending.length >= FLUSH_BATCH_SIZE) {
      void this.flush();
    }
    return event;
  }

  /** Send the pending batch; chained so batches arrive in seq order. */
  flush(): Promise<void> {
    if (this.pending.length === 0) return this.inFlight;
    const batch = this.pending;
    this.pending = [];
    this.inFlight = this.inFlight.then(async () => {
      await this.api.appendEvents(this.sessionId, batch);
    });
    return this.inFlight;
  }

  async drain(): Promise<void> {
    await this.flush();
    await this.inFlight;
  }
}

export interface RecorderHooks {
  onEvent?: (event: ActionEvent) => void;
}

/**
 * One authoring take: start audio + clock, capture gestures, then finalize
 * (save) or discard. Preview replays the locally captured log.
 */
export class RecordingController {
  buffer: UiSessionBuffer | null = null;
  private events: ActionEvent[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  state: "idle" | "recording" | "saved" | "discarded" = "idle";

  constructor(
    private readonly api: ApiClient,
    private readonly audio: AudioCapture,
    private readonly clock: RecordingClock & { start?(): void },
    private readonly hooks: RecorderHooks = {},
  ) {}

  get capturedEvents(): ActionEvent[] {
    return this.events;
  }

  async start(tutorialId: string, slot: number, language: string, notes: string): Promise<void> {
    const sessionId = await this.api.beginSession(tutorialId, slot, language, notes);
    await this.audio.start(); // browser prompts for the microphone here
    this.clock.start?.();
    this.buffer = new UiSessionBuffer(this.api, sessionId, this.clock);
    this.events = [];
    this.state = "recording";
    this.timer = setInterval(() => void this.buffer?.flush(), FLUSH_INTERVAL_MS);
  }

  capture(payload: EventPayload): void {
    if (this.state !== "recording" || !this.buffer) return; // gestures outside recording produce nothing
    const event = this.buffer.capture(payload);
    this.events.push(event);
    this.hooks.onEvent?.(event);
  }

  private stopTimer(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async save(): Promise<{ sectionId: string; finalCode: string; durationMs: number }> {
    if (this.state !== "recording" || !this.buffer) throw new Error("not recording");
    this.stopTimer();
    const audioBytes = await this.audio.stop();
    const durationMs = Math.max(this.clock.elapsedMs(), this.events.at(-1)?.at ?? 0);
    await this.buffer.drain();
    const result = await this.api.finalizeSession(this.buffer.sessionId, audioBytes, durationMs);
    this.state = "saved";
    return { sectionId: result.section_id, finalCode: result.final_code, durationMs: result.duration_ms };
  }

  async discard(): Promise<void> {
    if (!this.buffer) return;
    this.stopTimer();
    await this.audio.stop();
    await this.buffer.drain();
    await this.api.discardSession(this.buffer.sessionId);
    this.state = "discarded";
  }
}
