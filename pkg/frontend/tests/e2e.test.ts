// End-to-end against the real service: scripted input of the worked error
// sequence must render three color-coded alignment errors and show the
// service's score verbatim; no participant-visible payload or DOM text may
// leak the glove condition.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { CaptureBuffer } from "../src/capture";
import { renderDashboard } from "../src/dashboard";
import { renderDeviceStatus } from "../src/passive";
import {
  countRenderedErrors,
  displayedScore,
  renderFeedback,
  renderPianoRoll,
} from "../src/pianoRoll";
import { PracticeSession } from "../src/session";
import {
  analystToken,
  importSong,
  participantToken,
  startService,
  type ServiceHandle,
} from "./helpers/service";
import { PITCHES, songBytes } from "./helpers/smf";

const CONDITION_WORDS = ["sham", "functional", "glove_condition"];

let service: ServiceHandle;
let shamParticipant: string;

const visiblePayloads: string[] = [];

function track<T>(value: T): T {
  visiblePayloads.push(JSON.stringify(value));
  return value;
}

beforeAll(async () => {
  service = await startService();
  await importSong(service.baseUrl, "worked", songBytes("C B B A E E F C"));

  // enroll a team so every participant has a real (blinded) condition;
  // the analyst view tells the test which participant wears the sham glove
  const improvements = Object.fromEntries(
    Array.from({ length: 8 }, (_, i) => [`p${i + 1}`, (i + 1) * 2.0]),
  );
  const resp = await fetch(`${service.baseUrl}/study/assignments`, {
    method: "POST",
    headers: {
      Authorization: `Bearer ${analystToken()}`,
      "Content-Type": "application/json",
    },
    body: JSON.stringify({ team_id: "e2e-team", improvements, seed: 8 }),
  });
  const rows = (await resp.json()).assignments as Array<{
    participant_id: string;
    period: number;
    glove: string;
  }>;
  shamParticipant = rows.find((r) => r.period === 1 && r.glove === "sham")!.participant_id;
});

afterAll(() => {
  service?.stop();
});

describe("scripted practice flow", () => {
  it("replays the error sequence, renders 3 errors, and shows the exact score", async () => {
    const api = new ApiClient(
      service.baseUrl,
      participantToken(shamParticipant),
      shamParticipant,
    );

    let wall = 0;
    const buffer = new CaptureBuffer(() => wall);
    const session = new PracticeSession(api, buffer);
    await session.start("pre_test", "worked", 1);

    // scripted browser input: the performed sequence with one missing B,
    // one wrong note, and one extra C at the end
    "C B A E C F C C".split(" ").forEach((letter, i) => {
      wall = i * 500;
      buffer.noteOn(PITCHES[letter], 80);
      wall = i * 500 + 400;
      buffer.noteOff(PITCHES[letter]);
    });

    const result = await session.finish();
    expect(result).not.toBeNull();
    track(result);
    const report = result!.report;
    expect(report.alignment_cost).toBe(3);
    expect(report.op_counts.deletion).toBe(1);
    expect(report.op_counts.substitution).toBe(1);
    expect(report.op_counts.insertion).toBe(1);

    const feedbackPane = document.createElement("div");
    document.body.appendChild(feedbackPane);
    renderFeedback(feedbackPane, report);
    expect(countRenderedErrors(feedbackPane)).toBe(3);

    // the UI shows the service's normalized score verbatim: exact string match
    expect(displayedScore(feedbackPane)).toBe(report.score_display);
    expect(report.score_display).toBe("58.3333");

    // piano roll renders the reference without leaking anything extra
    const song = track(await api.getSong("worked"));
    const rollPane = document.createElement("div");
    document.body.appendChild(rollPane);
    renderPianoRoll(rollPane, song);
    expect(rollPane.querySelectorAll(".roll-reference")).toHaveLength(8);
  });

  it("keeps every participant-visible payload and the DOM free of condition labels", async () => {
    const api = new ApiClient(
      service.baseUrl,
      participantToken(shamParticipant),
      shamParticipant,
    );

    track(await api.listSongs());
    track(await api.progress());
    const dashboardPane = document.createElement("div");
    document.body.appendChild(dashboardPane);
    renderDashboard(dashboardPane, await api.progress());

    // the wearable flow: the schedule is compiled server-side from the
    // participant's (sham) assignment, but the device view only ever shows
    // battery and progress
    track(await api.provisionDevice(0));
    const uploaded = track(
      await api.deviceCommand({ command: "upload_schedule", song_id: "worked", day: 1 }),
    );
    expect(uploaded.playback).toBe("idle");
    track(await api.deviceCommand({ command: "start" }));
    track(await api.deviceCommand({ command: "advance", advance_ms: 3_000 }));
    const status = track(await api.deviceCommand({ command: "status" }));
    expect(status.playback).toBe("playing");
    expect(status.position_ms).toBeGreaterThan(0);
    const devicePane = document.createElement("div");
    document.body.appendChild(devicePane);
    renderDeviceStatus(devicePane, status);
    track(await api.deviceCommand({ command: "stop" }));

    const passive = track(
      await api.logPassiveSession({ song_id: "worked", day: 1, duration_minutes: 150 }),
    );
    expect(passive.flags).toEqual([]);
    track(await api.progress());

    for (const payload of visiblePayloads) {
      const lowered = payload.toLowerCase();
      for (const word of CONDITION_WORDS) {
        expect(lowered, `payload leaked "${word}": ${payload}`).not.toContain(word);
      }
    }
    const domText = (document.body.textContent ?? "").toLowerCase();
    for (const word of CONDITION_WORDS) {
      expect(domText, `DOM text leaked "${word}"`).not.toContain(word);
    }
  });
});
