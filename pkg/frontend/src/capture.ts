// Live input capture: hardware MIDI where the browser exposes it, with the
// on-screen keyboard as fallback. Timestamps are quantized to whole
// milliseconds, well inside the 5 ms budget, and kept monotone.

import type { NoteMessage } from "./types.js";

export class CaptureBuffer {
  private messages: NoteMessage[] = [];
  private startedAt: number | null = null;
  private lastTime = 0;

  constructor(private now: () => number = () => performance.now()) {}

  get active(): boolean {
    return this.startedAt !== null;
  }

  get count(): number {
    return this.messages.length;
  }

  start(): void {
    this.startedAt = this.now();
    this.lastTime = 0;
    this.messages = [];
  }

  private stamp(): number {
    if (this.startedAt === null) throw new Error("capture not started");
    const t = Math.max(0, Math.round(this.now() - this.startedAt));
    this.lastTime = Math.max(this.lastTime, t);
    return this.lastTime;
  }

  noteOn(pitch: number, velocity = 80): void {
    this.messages.push({ time_ms: this.stamp(), kind: "on", pitch, velocity });
  }

  noteOff(pitch: number): void {
    this.messages.push({ time_ms: this.stamp(), kind: "off", pitch, velocity: 0 });
  }

  /** Standard 3-byte channel voice message from a Web MIDI input. */
  midiMessage(data: Uint8Array | number[]): void {
    if (data.length < 3) return;
    const status = data[0] & 0xf0;
    const pitch = data[1];
    const velocity = data[2];
    if (status === 0x90 && velocity > 0) {
      this.noteOn(pitch, velocity);
    } else if (status === 0x80 || (status === 0x90 && velocity === 0)) {
      this.noteOff(pitch);
    }
  }

  drain(): NoteMessage[] {
    const out = this.messages;
    this.messages = [];
    return out;
  }

  finish(): NoteMessage[] {
    const out = this.drain();
    this.startedAt = null;
    return out;
  }
}

export interface MidiHookResult {
  source: "midi" | "onscreen";
  detach: () => void;
}

interface MidiInputLike {
  addEventListener(type: string, listener: (event: Event) => void): void;
  removeEventListener(type: string, listener: (event: Event) => void): void;
}

/** Attach hardware MIDI inputs to the buffer; resolves to the fallback
 * marker when the browser has no Web MIDI support or no inputs. */
export async function attachMidiInputs(buffer: CaptureBuffer): Promise<MidiHookResult> {
  const nav = navigator as Navigator & {
    requestMIDIAccess?: () => Promise<{ inputs: Map<string, MidiInputLike> }>;
  };
  if (!nav.requestMIDIAccess) {
    return { source: "onscreen", detach: () => {} };
  }
  try {
    const access = await nav.requestMIDIAccess();
    const inputs = Array.from(access.inputs.values());
    if (inputs.length === 0) {
      return { source: "onscreen", detach: () => {} };
    }
    const handler = (event: Event) => {
      const data = (event as Event & { data?: Uint8Array | null }).data;
      if (data) buffer.midiMessage(data);
    };
    for (const input of inputs) input.addEventListener("midimessage", handler);
    return {
      source: "midi",
      detach: () => {
        for (const input of inputs) input.removeEventListener("midimessage", handler);
      },
    };
  } catch {
    return { source: "onscreen", detach: () => {} };
  }
}

const KEY_LABELS = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

export function pitchLabel(pitch: number): string {
  return `${KEY_LABELS[pitch % 12]}${Math.floor(pitch / 12) - 1}`;
}

/** Clickable two-octave keyboard used when no MIDI hardware is present. */
export function buildOnscreenKeyboard(
  container: HTMLElement,
  buffer: CaptureBuffer,
  lowPitch = 48,
  highPitch = 72,
): void {
  container.replaceChildren();
  container.classList.add("onscreen-keyboard");
  for (let pitch = lowPitch; pitch <= highPitch; pitch++) {
    const key = document.createElement("button");
    const black = KEY_LABELS[pitch % 12].includes("#");
    key.className = black ? "key key-black" : "key key-white";
    key.dataset.pitch = String(pitch);
    key.textContent = black ? "" : pitchLabel(pitch);
    key.addEventListener("pointerdown", () => {
      if (buffer.active) buffer.noteOn(pitch);
      key.classList.add("key-down");
    });
    const release = () => {
      if (buffer.active && key.classList.contains("key-down")) buffer.noteOff(pitch);
      key.classList.remove("key-down");
    };
    key.addEventListener("pointerup", release);
    key.addEventListener("pointerleave", release);
    container.appendChild(key);
  }
}
