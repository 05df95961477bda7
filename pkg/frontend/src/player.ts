/**
 * Playback loop: the audio element is the master clock. Every frame the
 * player reads the audio position, reconstructs the state there with the
 * snapshot index (cheap for both scrubbing directions) and hands it to the
 * renderer. Pausing freezes the state exactly; seeking the audio seeks the
 * recording.
 */

import { buildSnapshotIndex, PlaybackState, Snapshot, stateAt } from "./replay.js";
import { ActionEvent, decodeEvents, SectionDocument } from "./wire.js";

/** The slice of HTMLAudioElement playback cares about (stubbed in tests). */
export interface AudioLike {
  currentTime: number; // seconds
  duration: number;
  paused: boolean;
  play(): Promise<void>;
  pause(): void;
}

export type FrameScheduler = (cb: () => void) => void;

const rafScheduler: FrameScheduler = (cb) => requestAnimationFrame(() => cb());

export class SectionPlayer {
  readonly events: ActionEvent[];
  readonly durationMs: number;
  readonly notes: string;
  private index: Snapshot[];
  private running = false;
  private lastRendered = -1;

  constructor(
    doc: SectionDocument,
    private readonly audio: AudioLike,
    private readonly render: (state: PlaybackState) => void,
    private readonly schedule: FrameScheduler = rafScheduler,
  ) {
    this.events = decodeEvents(doc);
    this.durationMs = doc.duration_ms;
    this.notes = doc.notes;
    this.index = buildSnapshotIndex(this.events, this.durationMs, this.notes);
  }

  get playheadMs(): number {
    return Math.min(this.durationMs, Math.round(this.audio.currentTime * 1000));
  }

  stateAtPlayhead(): PlaybackState {
    return stateAt(this.events, this.playheadMs, this.notes, this.index);
  }

  seek(ms: number): void {
    const clamped = Math.min(this.durationMs, Math.max(0, ms));
    this.audio.currentTime = clamped / 1000;
    this.renderNow();
  }

  renderNow(): void {
    this.lastRendered = this.playheadMs;
    this.render(this.stateAtPlayhead());
  }

  async play(): Promise<void> {
    await this.audio.play();
    if (this.running) return;
    this.running = true;
    const tick = () => {
      if (!this.running) return;
      const at = this.playheadMs;
      if (at !== this.lastRendered) {
        this.lastRendered = at;
        this.render(stateAt(this.events, at, this.notes, this.index));
      }
      if (this.audio.paused || at >= this.durationMs) {
        this.running = false;
        return;
      }
      this.schedule(tick);
    };
    this.schedule(tick);
  }

  pause(): void {
    this.audio.pause();
    this.running = false;
    this.renderNow(); // freeze exactly at the audio position
  }
}
