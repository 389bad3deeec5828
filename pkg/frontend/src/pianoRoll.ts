// Piano-roll rendering: the reference lane, captured-note overlay, and the
// post-submission feedback view with one color-coded element per alignment op.

import type { AlignmentOp, EvalReport, NoteMessage, Song } from "./types.js";

export const OP_CLASSES: Record<string, string> = {
  match: "op-match",
  substitution: "op-substitution",
  deletion: "op-deletion",
  insertion: "op-insertion",
};

const MS_PER_PX = 25;
const PITCH_STEP_PX = 6;

function pitchTop(pitch: number): number {
  return (108 - pitch) * PITCH_STEP_PX;
}

export function renderPianoRoll(
  container: HTMLElement,
  song: Song,
  captured: NoteMessage[] = [],
  playheadMs: number | null = null,
): void {
  container.replaceChildren();
  container.classList.add("piano-roll");
  for (const event of song.events) {
    const note = document.createElement("div");
    note.className = "roll-note roll-reference";
    note.style.left = `${event.onset_ms / MS_PER_PX}px`;
    note.style.width = `${Math.max(2, event.duration_ms / MS_PER_PX)}px`;
    note.style.top = `${pitchTop(event.pitch)}px`;
    note.title = `pitch ${event.pitch} @ ${event.onset_ms} ms`;
    container.appendChild(note);
  }
  const open = new Map<number, { element: HTMLDivElement; start: number }>();
  for (const message of captured) {
    if (message.kind === "on") {
      const note = document.createElement("div");
      note.className = "roll-note roll-captured";
      note.style.left = `${message.time_ms / MS_PER_PX}px`;
      note.style.top = `${pitchTop(message.pitch)}px`;
      note.style.width = "2px";
      container.appendChild(note);
      open.set(message.pitch, { element: note, start: message.time_ms });
    } else {
      const started = open.get(message.pitch);
      if (started) {
        const width = Math.max(2, (message.time_ms - started.start) / MS_PER_PX);
        started.element.style.width = `${width}px`;
        open.delete(message.pitch);
      }
    }
  }
  if (playheadMs !== null) {
    const playhead = document.createElement("div");
    playhead.className = "playhead";
    playhead.style.left = `${playheadMs / MS_PER_PX}px`;
    container.appendChild(playhead);
  }
}

function opElement(op: AlignmentOp): HTMLElement {
  const el = document.createElement("div");
  el.className = `op ${OP_CLASSES[op.kind]}`;
  el.dataset.kind = op.kind;
  const pitches = op.ref_pitches ?? op.perf_pitches ?? [];
  const where = op.t_ref ?? op.t_perf ?? 0;
  el.style.left = `${where / MS_PER_PX}px`;
  el.style.top = `${pitchTop(Math.min(...pitches, 108))}px`;
  if (op.kind === "match" && op.timing_violation) {
    el.classList.add("timing-violation");
    el.dataset.deltaMs = String(op.delta_ms ?? "");
  }
  el.title = `${op.kind}${op.timing_violation ? ` (off by ${op.delta_ms} ms)` : ""}`;
  return el;
}

/** Feedback view: every alignment op color-coded on the roll, timing
 * violations flagged, and the score shown exactly as the service sent it. */
export function renderFeedback(container: HTMLElement, report: EvalReport): void {
  container.replaceChildren();
  container.classList.add("feedback");

  const score = document.createElement("div");
  score.className = "score-display";
  score.textContent = report.score_display;
  container.appendChild(score);

  const summary = document.createElement("div");
  summary.className = "feedback-summary";
  const errors =
    report.op_counts.substitution + report.op_counts.deletion + report.op_counts.insertion;
  summary.textContent =
    `${report.matched_count} matched, ${report.op_counts.substitution} substituted, ` +
    `${report.op_counts.deletion} missed, ${report.op_counts.insertion} extra, ` +
    `${report.timing_cost} timing ${report.timing_cost === 1 ? "flag" : "flags"}` +
    (errors === 0 ? " — clean run" : "");
  container.appendChild(summary);

  const lane = document.createElement("div");
  lane.className = "feedback-lane piano-roll";
  for (const op of report.ops) {
    lane.appendChild(opElement(op));
  }
  container.appendChild(lane);
}

export function countRenderedErrors(container: HTMLElement): number {
  return container.querySelectorAll(".op-substitution, .op-deletion, .op-insertion").length;
}

export function countRenderedTimingFlags(container: HTMLElement): number {
  return container.querySelectorAll(".timing-violation").length;
}

export function displayedScore(container: HTMLElement): string {
  return container.querySelector(".score-display")?.textContent ?? "";
}
