// Backend client: REST fetch helpers plus the two websocket subscriptions.

import type { FrameMessage, MemoryPage, ResponsePayload, StreamStatus, UiEvent } from "./types.js";

export type SocketState = "connecting" | "open" | "reconnecting" | "closed" | "rejected";

export interface SocketOptions {
  initialBackoffMs?: number;
  maxBackoffMs?: number;
}

const UNKNOWN_STREAM_CLOSE = 4404;

export function wsUrl(base: string, path: string): string {
  return base.replace(/^http/, "ws").replace(/\/$/, "") + path;
}

async function messageText(data: unknown): Promise<string> {
  if (typeof data === "string") return data;
  if (data instanceof ArrayBuffer) return new TextDecoder().decode(new Uint8Array(data));
  // Blob, in browsers that ignore binaryType
  return await (data as Blob).text();
}

function openWithRetry(
  url: string,
  onMessage: (raw: string) => void,
  onState: (state: SocketState) => void,
  opts: SocketOptions,
): () => void {
  let ws: WebSocket | null = null;
  let closed = false;
  const initial = opts.initialBackoffMs ?? 1000;
  const cap = opts.maxBackoffMs ?? 8000;
  let retryMs = initial;

  const open = () => {
    onState(ws === null ? "connecting" : "reconnecting");
    ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => {
      retryMs = initial;
      onState("open");
    };
    ws.onmessage = (ev) => {
      void messageText(ev.data).then(onMessage);
    };
    ws.onclose = (ev) => {
      if (closed) return;
      if (ev.code === UNKNOWN_STREAM_CLOSE) {
        onState("rejected");
        return; // no such stream; retrying cannot help
      }
      onState("reconnecting");
      setTimeout(open, retryMs);
      retryMs = Math.min(retryMs * 2, cap);
    };
    ws.onerror = () => {
      // onclose follows and owns the retry
    };
  };

  open();
  return () => {
    closed = true;
    onState("closed");
    ws?.close();
  };
}

export function openEvents(
  base: string,
  streamId: string,
  onEvent: (event: UiEvent) => void,
  onState: (state: SocketState) => void,
  opts: SocketOptions = {},
): () => void {
  return openWithRetry(
    wsUrl(base, `/streams/${streamId}/events`),
    (raw) => onEvent(JSON.parse(raw) as UiEvent),
    onState,
    opts,
  );
}

export function openFrames(
  base: string,
  streamId: string,
  onFrame: (frame: FrameMessage) => void,
  onState: (state: SocketState) => void,
  opts: SocketOptions = {},
): () => void {
  return openWithRetry(
    wsUrl(base, `/streams/${streamId}/frames`),
    (raw) => onFrame(JSON.parse(raw) as FrameMessage),
    onState,
    opts,
  );
}

export async function fetchStatus(base: string, streamId: string): Promise<StreamStatus | null> {
  const res = await fetch(new URL(`/streams/${streamId}`, base));
  if (res.status === 404) return null;
  if (!res.ok) throw new Error(`status ${res.status}`);
  return (await res.json()) as StreamStatus;
}

export async function fetchMemory(base: string, streamId: string): Promise<MemoryPage> {
  const res = await fetch(new URL(`/streams/${streamId}/memory?page_size=1000`, base));
  if (!res.ok) throw new Error(`status ${res.status}`);
  return (await res.json()) as MemoryPage;
}

export interface QueryResult {
  ok: boolean;
  status: number;
  response?: ResponsePayload;
  detail?: string;
}

export async function postQuery(base: string, streamId: string, text: string): Promise<QueryResult> {
  const res = await fetch(new URL(`/streams/${streamId}/query`, base), {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ text }),
  });
  if (res.ok) return { ok: true, status: res.status, response: (await res.json()) as ResponsePayload };
  let detail = "";
  try {
    detail = JSON.stringify(await res.json());
  } catch {
    detail = res.statusText;
  }
  return { ok: false, status: res.status, detail };
}
