// Thin typed client over the practice service. All scoring stays server-side;
// this file is the only place that talks to the network.

import type {
  DeviceStatus,
  NoteMessage,
  ProgressResponse,
  SessionKind,
  Song,
  SubmitResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
    public participantId: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await response.text();
    const data = text ? JSON.parse(text) : {};
    if (!response.ok) {
      const detail = data?.detail ?? {};
      throw new ApiError(response.status, detail.error ?? "HttpError", detail.message ?? text);
    }
    return data as T;
  }

  listSongs(): Promise<{ songs: string[] }> {
    return this.request("GET", "/songs");
  }

  getSong(songId: string): Promise<Song> {
    return this.request("GET", `/songs/${songId}`);
  }

  submitPerformance(body: {
    song_id: string;
    kind: SessionKind;
    day: number;
    messages: NoteMessage[];
  }): Promise<SubmitResult> {
    return this.request("POST", `/participants/${this.participantId}/performances`, body);
  }

  startCapture(songId: string, kind: SessionKind, day: number): Promise<unknown> {
    return this.request("POST", `/participants/${this.participantId}/capture`, {
      song_id: songId,
      kind,
      day,
    });
  }

  appendCapture(messages: NoteMessage[]): Promise<{ buffered: number }> {
    return this.request("POST", `/participants/${this.participantId}/capture/events`, {
      messages,
    });
  }

  submitCapture(): Promise<SubmitResult> {
    return this.request("POST", `/participants/${this.participantId}/capture/submit`);
  }

  discardCapture(): Promise<{ discarded: boolean }> {
    return this.request("DELETE", `/participants/${this.participantId}/capture`);
  }

  progress(): Promise<ProgressResponse> {
    return this.request("GET", `/participants/${this.participantId}/progress`);
  }

  logPassiveSession(body: {
    song_id: string;
    day: number;
    duration_minutes: number;
    started_at?: string;
    ended_at?: string;
    flags?: string[];
  }): Promise<{ record_id: string; flags: string[] }> {
    return this.request("POST", `/participants/${this.participantId}/sessions`, {
      kind: "passive",
      ...body,
    });
  }

  provisionDevice(timeScale = 1.0): Promise<DeviceStatus> {
    return this.request("POST", `/gloves/${this.participantId}`, { time_scale: timeScale });
  }

  deviceCommand(body: {
    command: "upload_schedule" | "start" | "stop" | "status" | "advance";
    song_id?: string;
    minutes?: number;
    day?: number;
    advance_ms?: number;
  }): Promise<DeviceStatus> {
    return this.request("POST", `/gloves/${this.participantId}/commands`, body);
  }
}
