// Progress dashboard: per-day active/passive deltas as a table plus bars.

import type { ProgressResponse } from "./types.js";

function deltaCell(value: number | null): HTMLTableCellElement {
  const cell = document.createElement("td");
  if (value === null) {
    cell.textContent = "—";
    return cell;
  }
  cell.textContent = value > 0 ? `+${value}` : String(value);
  cell.className = value > 0 ? "delta-gain" : value < 0 ? "delta-loss" : "delta-flat";
  return cell;
}

export function renderDashboard(container: HTMLElement, progress: ProgressResponse): void {
  container.replaceChildren();
  container.classList.add("dashboard");

  const heading = document.createElement("h2");
  heading.textContent = "Daily progress";
  container.appendChild(heading);

  if (progress.points.length === 0) {
    const empty = document.createElement("p");
    empty.textContent = "No test sessions recorded yet.";
    container.appendChild(empty);
    return;
  }

  const table = document.createElement("table");
  table.className = "progress-table";
  const head = table.createTHead().insertRow();
  for (const label of ["Day", "Active practice", "Passive rehearsal"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const point of progress.points) {
    const row = body.insertRow();
    const day = document.createElement("td");
    day.textContent = String(point.day);
    row.appendChild(day);
    row.appendChild(deltaCell(point.active_delta));
    row.appendChild(deltaCell(point.passive_delta));
  }
  container.appendChild(table);

  const bars = document.createElement("div");
  bars.className = "progress-bars";
  const scale = Math.max(
    1,
    ...progress.points.flatMap((p) => [Math.abs(p.active_delta), Math.abs(p.passive_delta ?? 0)]),
  );
  for (const point of progress.points) {
    for (const [cls, value] of [
      ["bar-active", point.active_delta],
      ["bar-passive", point.passive_delta ?? 0],
    ] as const) {
      const bar = document.createElement("div");
      bar.className = `bar ${cls} ${value < 0 ? "bar-negative" : ""}`;
      bar.style.height = `${(Math.abs(value) / scale) * 60}px`;
      bar.title = `day ${point.day}: ${value}`;
      bars.appendChild(bar);
    }
  }
  container.appendChild(bars);
}
