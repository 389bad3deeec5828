// Active-session state machine: one live capture at a time, a 30-minute
// countdown for practice runs, zero-event sessions discarded with a prompt.

import { ApiClient } from "./api.js";
import { CaptureBuffer } from "./capture.js";
import type { SessionKind, SubmitResult } from "./types.js";

export const PRACTICE_MINUTES = 30;

export type SessionState = "idle" | "testing" | "practicing";

export interface SessionEvents {
  onState?: (state: SessionState) => void;
  onCountdown?: (remainingMs: number) => void;
  onDiscarded?: (reason: string) => void;
}

export class PracticeSession {
  state: SessionState = "idle";
  kind: SessionKind | null = null;
  private songId: string | null = null;
  private day = 1;
  private deadline: number | null = null;

  constructor(
    private api: ApiClient,
    public buffer: CaptureBuffer,
    private events: SessionEvents = {},
    private now: () => number = () => Date.now(),
  ) {}

  async start(kind: SessionKind, songId: string, day: number): Promise<void> {
    if (this.state !== "idle") {
      throw new Error("a session is already active");
    }
    await this.api.startCapture(songId, kind, day);
    this.kind = kind;
    this.songId = songId;
    this.day = day;
    this.buffer.start();
    this.state = kind === "practice" ? "practicing" : "testing";
    this.deadline = kind === "practice" ? this.now() + PRACTICE_MINUTES * 60_000 : null;
    this.events.onState?.(this.state);
  }

  remainingMs(): number | null {
    if (this.deadline === null) return null;
    return Math.max(0, this.deadline - this.now());
  }

  tickCountdown(): void {
    const remaining = this.remainingMs();
    if (remaining !== null) this.events.onCountdown?.(remaining);
  }

  async flush(): Promise<void> {
    const pending = this.buffer.drain();
    if (pending.length > 0) {
      await this.api.appendCapture(pending);
    }
  }

  /** Stop and submit; a session with no input is discarded, not scored. */
  async finish(): Promise<SubmitResult | null> {
    if (this.state === "idle") {
      throw new Error("no session active");
    }
    const tail = this.buffer.finish();
    const hadInput = tail.length > 0 || (await this.sentAnything(tail));
    if (!hadInput) {
      await this.api.discardCapture();
      this.reset();
      this.events.onDiscarded?.("No notes were played, so nothing was scored.");
      return null;
    }
    if (tail.length > 0) {
      await this.api.appendCapture(tail);
    }
    const result = await this.api.submitCapture();
    this.reset();
    return result;
  }

  private async sentAnything(tail: { length: number }[] | unknown[]): Promise<boolean> {
    if (tail.length > 0) return true;
    // probe the server-side buffer by appending nothing
    const { buffered } = await this.api.appendCapture([]);
    return buffered > 0;
  }

  async abort(): Promise<void> {
    if (this.state === "idle") return;
    this.buffer.finish();
    await this.api.discardCapture();
    this.reset();
  }

  private reset(): void {
    this.state = "idle";
    this.kind = null;
    this.songId = null;
    this.deadline = null;
    this.events.onState?.(this.state);
  }
}
