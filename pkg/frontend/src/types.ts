// Wire types for the backend's REST and websocket payloads.

export interface UiEvent {
  kind: "memory_tick" | "state_change" | "response" | "error";
  payload: MemoryTickPayload | StateChangePayload | ResponsePayload | ErrorPayload;
  seq: number;
  t: number;
}

export interface MemoryTickPayload {
  entry_id: number;
  t_start: number;
  t_end: number;
  description: string;
}

// session transitions carry from/to; the stream-scope event carries state
export interface StateChangePayload {
  scope: "session" | "stream";
  from?: string;
  to?: string;
  state?: string;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

export interface ResponsePayload {
  query: string;
  intent: "grounding" | "summarize" | "plan" | "retrieve" | "generate" | "current_scene";
  text: string;
  media: MediaItem[];
  tts_audio: { media_url: string; duration_s: number } | null;
  t_issued: number;
  latency_ms: number;
  error_code: string | null;
}

export interface GroundingHit {
  t_start: number;
  t_end: number;
  description: string;
  score: number;
  timestamp: string;
}

export interface RetrievalHit {
  video_id: string;
  title: string;
  source_uri: string;
  duration_s: number;
  score: number;
}

export interface GeneratedClip {
  clip_id: string;
  duration_s: number;
  source_frame_time: number;
  prompt: string;
  media_url: string;
}

export interface StepSummary {
  steps: { t_start: number; t_end: number; text: string }[];
  source_entry_ids: number[];
  text: string;
}

export type MediaItem = GroundingHit | RetrievalHit | GeneratedClip | StepSummary;

export interface MemoryEntry {
  id: number;
  t_start: number;
  t_end: number;
  description: string;
  timestamp: string;
}

export interface MemoryPage {
  entries: MemoryEntry[];
  page: number;
  page_size: number;
  total: number;
}

export interface StreamStatus {
  stream_id: string;
  source: { kind: string; uri: string; rate: number };
  session_state: string;
  invalid_events: number;
  ended: boolean;
  memory_entries: number;
  memory_gaps: number;
  stats: Record<string, number>;
}

export interface FrameMessage {
  media_time: number;
  seq: number;
  jpeg_b64: string;
}
