// Browser entry point: wires the capture buffer, session machine, passive
// logger, and dashboard onto the page.

import { ApiClient } from "./api.js";
import { CaptureBuffer, attachMidiInputs, buildOnscreenKeyboard } from "./capture.js";
import { renderDashboard } from "./dashboard.js";
import { PassiveLogger, renderDeviceStatus } from "./passive.js";
import { renderFeedback, renderPianoRoll } from "./pianoRoll.js";
import { PracticeSession } from "./session.js";
import type { SessionKind } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";
  const token = params.get("token") ?? window.prompt("Access token") ?? "";
  const participantId = token.split(".")[0] ?? "";
  const api = new ApiClient(baseUrl, token, participantId);

  const buffer = new CaptureBuffer();
  const statusLine = el<HTMLDivElement>("status-line");
  const feedbackPane = el<HTMLDivElement>("feedback");
  const rollPane = el<HTMLDivElement>("piano-roll");
  const session = new PracticeSession(api, buffer, {
    onState: (state) => {
      statusLine.textContent = state === "idle" ? "Ready." : `Session active: ${state}`;
    },
    onCountdown: (remainingMs) => {
      const minutes = Math.floor(remainingMs / 60_000);
      const seconds = Math.floor((remainingMs % 60_000) / 1000);
      el("countdown").textContent = `${minutes}:${String(seconds).padStart(2, "0")}`;
    },
    onDiscarded: (reason) => {
      statusLine.textContent = reason;
    },
  });

  const hook = await attachMidiInputs(buffer);
  el("input-source").textContent =
    hook.source === "midi" ? "Hardware MIDI connected" : "On-screen keyboard";
  buildOnscreenKeyboard(el("keyboard"), buffer);

  const songSelect = el<HTMLSelectElement>("song-select");
  const { songs } = await api.listSongs();
  for (const songId of songs) {
    const opt = document.createElement("option");
    opt.value = songId;
    opt.textContent = songId;
    songSelect.appendChild(opt);
  }

  songSelect.addEventListener("change", async () => {
    const song = await api.getSong(songSelect.value);
    renderPianoRoll(rollPane, song);
  });
  if (songs.length > 0) {
    songSelect.value = songs[0];
    renderPianoRoll(rollPane, await api.getSong(songs[0]));
  }

  const dayInput = el<HTMLInputElement>("day-input");
  const kindSelect = el<HTMLSelectElement>("kind-select");

  el("start-button").addEventListener("click", async () => {
    try {
      await session.start(
        kindSelect.value as SessionKind,
        songSelect.value,
        Number(dayInput.value) || 1,
      );
      feedbackPane.replaceChildren();
    } catch (error) {
      statusLine.textContent = String(error);
    }
  });

  el("stop-button").addEventListener("click", async () => {
    try {
      const result = await session.finish();
      if (result) renderFeedback(feedbackPane, result.report);
    } catch (error) {
      statusLine.textContent = String(error);
    }
  });

  window.setInterval(() => {
    session.tickCountdown();
    if (session.state !== "idle") void session.flush();
  }, 1000);

  // passive session controls
  const devicePane = el<HTMLDivElement>("device-status");
  const passive = new PassiveLogger(api, {
    onStatus: (status) => renderDeviceStatus(devicePane, status),
    onFinished: ({ durationMinutes, flags }) => {
      statusLine.textContent =
        `Passive session recorded: ${durationMinutes} min` +
        (flags.length ? ` (${flags.join(", ")})` : "");
    },
  });
  let passivePoll: number | null = null;
  el("passive-start").addEventListener("click", async () => {
    try {
      await api.provisionDevice().catch(() => undefined); // may already exist
      await passive.begin(songSelect.value, Number(dayInput.value) || 1);
      passivePoll = window.setInterval(async () => {
        const running = await passive.poll(songSelect.value, Number(dayInput.value) || 1);
        if (!running && passivePoll !== null) {
          window.clearInterval(passivePoll);
          passivePoll = null;
        }
      }, 1000);
    } catch (error) {
      statusLine.textContent = String(error);
    }
  });
  el("passive-stop").addEventListener("click", async () => {
    if (passivePoll !== null) window.clearInterval(passivePoll);
    passivePoll = null;
    await passive.end(songSelect.value, Number(dayInput.value) || 1);
  });

  el("refresh-progress").addEventListener("click", async () => {
    renderDashboard(el("dashboard"), await api.progress());
  });
}

window.addEventListener("DOMContentLoaded", () => {
  void boot().catch((error) => {
    const line = document.getElementById("status-line");
    if (line) line.textContent = `Failed to start: ${error}`;
  });
});
