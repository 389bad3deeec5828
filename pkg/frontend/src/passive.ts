// Passive-session logging: drive the simulated glove pair, poll its status
// at 1 Hz, and record the session when playback ends. The view shows battery
// and progress only; glove condition never appears anywhere in this flow.

import { ApiClient } from "./api.js";
import type { DeviceStatus } from "./types.js";

export interface PassiveView {
  onStatus?: (status: DeviceStatus) => void;
  onFinished?: (summary: { durationMinutes: number; flags: string[] }) => void;
}

export class PassiveLogger {
  running = false;
  private startedAtMs: number | null = null;
  private lastStatus: DeviceStatus | null = null;

  constructor(
    private api: ApiClient,
    private view: PassiveView = {},
    private now: () => number = () => Date.now(),
  ) {}

  async begin(songId: string, day: number, minutes = 150): Promise<DeviceStatus> {
    await this.api.deviceCommand({ command: "upload_schedule", song_id: songId, minutes, day });
    const status = await this.api.deviceCommand({ command: "start" });
    this.running = true;
    this.startedAtMs = this.now();
    this.lastStatus = status;
    this.view.onStatus?.(status);
    return status;
  }

  /** One 1 Hz poll step; returns true while the session is still running. */
  async poll(songId: string, day: number): Promise<boolean> {
    if (!this.running) return false;
    const status = await this.api.deviceCommand({ command: "status" });
    this.lastStatus = status;
    this.view.onStatus?.(status);
    const exhausted = status.battery_pct <= 0;
    if (status.completed || exhausted || status.playback === "idle") {
      await this.end(songId, day, exhausted ? ["battery_exhausted"] : []);
      return false;
    }
    return true;
  }

  async end(songId: string, day: number, extraFlags: string[] = []): Promise<void> {
    if (!this.running || this.startedAtMs === null) return;
    await this.api.deviceCommand({ command: "stop" });
    // duration comes from simulated playback, not wall-clock polling time
    const playedMs = this.lastStatus?.position_ms ?? this.now() - this.startedAtMs;
    const durationMinutes = Math.round((playedMs / 60_000) * 100) / 100;
    const { flags } = await this.api.logPassiveSession({
      song_id: songId,
      day,
      duration_minutes: durationMinutes,
      flags: extraFlags,
    });
    this.running = false;
    this.startedAtMs = null;
    this.view.onFinished?.({ durationMinutes, flags });
  }
}

export function renderDeviceStatus(container: HTMLElement, status: DeviceStatus): void {
  container.replaceChildren();
  container.classList.add("device-status");
  const battery = document.createElement("div");
  battery.className = "battery";
  battery.textContent = `Battery ${status.battery_pct.toFixed(1)}%`;
  const playback = document.createElement("div");
  playback.className = "playback";
  const minutes = Math.floor(status.position_ms / 60_000);
  playback.textContent =
    status.playback === "playing" ? `Playing — ${minutes} min elapsed` : "Idle";
  container.append(battery, playback);
}
