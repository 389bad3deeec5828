// Payload shapes returned by the practice service.

export type MessageKind = "on" | "off";

export interface NoteMessage {
  time_ms: number;
  kind: MessageKind;
  pitch: number;
  velocity: number;
}

export type OpKind = "match" | "substitution" | "deletion" | "insertion";

export interface AlignmentOp {
  kind: OpKind;
  ref_idx: number | null;
  perf_idx: number | null;
  cost: number;
  ref_pitches?: number[];
  perf_pitches?: number[];
  t_ref?: number;
  t_perf?: number;
  delta_ms?: number;
  timing_violation?: boolean;
}

export interface EvalReport {
  alignment_cost: number;
  timing_cost: number;
  total_cost: number;
  score: number;
  score_display: string;
  matched_count: number;
  op_counts: Record<OpKind, number>;
  ops: AlignmentOp[];
  config: {
    timing_threshold_ms: number;
    weight_alignment: number;
    weight_timing: number;
    chord_window_ms: number;
  };
}

export interface SubmitResult {
  record_id: string;
  report: EvalReport;
}

export interface SongEvent {
  pitch: number;
  onset_ms: number;
  duration_ms: number;
  velocity: number;
  hand: string | null;
  finger: number | null;
}

export interface Song {
  id: string;
  title: string;
  ppq: number;
  span_ms: number;
  events: SongEvent[];
}

export interface ProgressPoint {
  day: number;
  active_delta: number;
  passive_delta: number | null;
}

export interface TestScore {
  day: number;
  kind: string;
  song_id: string;
  score: number;
}

export interface ProgressResponse {
  participant_id: string;
  points: ProgressPoint[];
  tests: TestScore[];
}

export interface DeviceStatus {
  battery_pct: number;
  playback: "idle" | "playing" | "paused";
  position_ms: number;
  completed: boolean;
}

export type SessionKind = "pre_test" | "practice" | "post_test";
