// Input capture: ordering, quantization, MIDI parsing, on-screen fallback.

import { describe, expect, it } from "vitest";

import { CaptureBuffer, buildOnscreenKeyboard, pitchLabel } from "../src/capture";

function clocked(times: number[]): CaptureBuffer {
  let i = 0;
  return new CaptureBuffer(() => times[Math.min(i++, times.length - 1)]);
}

describe("CaptureBuffer", () => {
  it("keeps event order and quantizes to whole milliseconds", () => {
    const buffer = clocked([1000, 1000.4, 1250.7, 1502.3]);
    buffer.start();
    buffer.noteOn(60);
    buffer.noteOn(64);
    buffer.noteOff(60);
    const messages = buffer.finish();
    expect(messages.map((m) => [m.time_ms, m.kind, m.pitch])).toEqual([
      [0, "on", 60],
      [251, "on", 64],
      [502, "off", 60],
    ]);
    for (const m of messages) {
      expect(Number.isInteger(m.time_ms)).toBe(true);
    }
  });

  it("never lets timestamps run backwards", () => {
    const buffer = clocked([1000, 1100, 1090, 1120]);
    buffer.start();
    buffer.noteOn(60);
    buffer.noteOff(60); // clock jitter backwards
    buffer.noteOn(62);
    const [a, b, c] = buffer.finish();
    expect(a.time_ms).toBeLessThanOrEqual(b.time_ms);
    expect(b.time_ms).toBeLessThanOrEqual(c.time_ms);
  });

  it("decodes note-on/off channel messages, velocity 0 meaning off", () => {
    const buffer = clocked([0, 1, 2, 3]);
    buffer.start();
    buffer.midiMessage([0x90, 60, 90]);
    buffer.midiMessage([0x90, 60, 0]);
    buffer.midiMessage([0x80, 64, 40]);
    const messages = buffer.finish();
    expect(messages.map((m) => m.kind)).toEqual(["on", "off", "off"]);
    expect(messages[0].velocity).toBe(90);
  });

  it("drain leaves the capture active for streaming", () => {
    const buffer = clocked([0, 5, 10]);
    buffer.start();
    buffer.noteOn(60);
    expect(buffer.drain()).toHaveLength(1);
    expect(buffer.active).toBe(true);
    buffer.noteOff(60);
    expect(buffer.finish()).toHaveLength(1);
    expect(buffer.active).toBe(false);
  });
});

describe("on-screen keyboard", () => {
  it("maps clicks into the buffer only while capturing", () => {
    const container = document.createElement("div");
    let t = 0;
    const buffer = new CaptureBuffer(() => (t += 10));
    buildOnscreenKeyboard(container, buffer, 60, 72);
    const key = container.querySelector('[data-pitch="64"]') as HTMLButtonElement;
    expect(key).not.toBeNull();

    key.dispatchEvent(new Event("pointerdown"));
    key.dispatchEvent(new Event("pointerup")); // not capturing: ignored
    buffer.start();
    key.dispatchEvent(new Event("pointerdown"));
    key.dispatchEvent(new Event("pointerup"));
    const messages = buffer.finish();
    expect(messages.map((m) => [m.kind, m.pitch])).toEqual([
      ["on", 64],
      ["off", 64],
    ]);
  });

  it("labels white keys", () => {
    expect(pitchLabel(60)).toBe("C4");
    expect(pitchLabel(69)).toBe("A4");
  });
});
