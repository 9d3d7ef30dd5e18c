// Composition root: builds the page skeleton and wires sockets, log, timeline,
// audio queue, and the query box together. All state lives in the event log;
// the DOM is a view over it.

import { AudioQueue } from "./audio.js";
import { EventLog } from "./log.js";
import { renderEvent, TimelineStrip } from "./render.js";
import type { GroundingHit, MemoryTickPayload, ResponsePayload, UiEvent } from "./types.js";
import {
  fetchMemory,
  fetchStatus,
  openEvents,
  openFrames,
  postQuery,
  type SocketOptions,
  type SocketState,
} from "./wire.js";

export interface AppOptions {
  base?: string;
  streamId?: string;
  socket?: SocketOptions;
  audioFactory?: () => HTMLAudioElement;
}

export interface AppHandle {
  stop(): void;
}

function div(className: string): HTMLDivElement {
  const node = document.createElement("div");
  node.className = className;
  return node;
}

export function startApp(root: HTMLElement, opts: AppOptions = {}): AppHandle {
  const banner = div("banner");
  const framePanel = div("frame-panel");
  const frameView = document.createElement("img");
  frameView.className = "frame-view";
  frameView.alt = "live stream";
  const frameTime = document.createElement("span");
  frameTime.className = "frame-time";
  framePanel.append(frameView, frameTime);

  const timelineBox = div("timeline");
  const logList = document.createElement("ol");
  logList.className = "event-log";
  // optimistic rows live outside the log so seq indexes stay aligned with it
  const pendingBox = document.createElement("ul");
  pendingBox.className = "pending-box";

  const form = document.createElement("form");
  form.className = "query-form";
  const input = document.createElement("input");
  input.className = "query-input";
  input.placeholder = "Ask about the stream…";
  const send = document.createElement("button");
  send.className = "query-send";
  send.type = "submit";
  send.textContent = "Ask";
  send.disabled = true;
  form.append(input, send);

  const audioHost = div("audio-host");
  audioHost.hidden = true;

  root.append(banner, framePanel, timelineBox, logList, pendingBox, form, audioHost);

  const setBanner = (text: string, kind: "info" | "error" = "info") => {
    banner.textContent = text;
    banner.classList.toggle("error", kind === "error");
  };

  const streamId =
    opts.streamId ?? new URLSearchParams(window.location.search).get("stream") ?? "";
  const base = opts.base ?? window.location.origin;
  if (streamId === "") {
    setBanner("no stream selected; open with ?stream=<id>", "error");
    return { stop() {} };
  }

  const log = new EventLog();
  const strip = new TimelineStrip(timelineBox);
  const audio = new AudioQueue(audioHost, opts.audioFactory);
  const mediaUrl = (path: string) => new URL(path, base).toString();
  const handlers = {
    seek: (hit: GroundingHit) => strip.seek(hit.t_start, hit.t_end),
    mediaUrl,
  };

  const refreshGapClass = (index: number) => {
    const row = logList.children[index] as HTMLElement | undefined;
    if (row) row.classList.toggle("gap-before", log.hasGapBefore(index));
  };

  const onEvent = (event: UiEvent) => {
    const index = log.insert(event);
    if (index < 0) return;
    const row = renderEvent(event, handlers);
    logList.insertBefore(row, logList.children[index] ?? null);
    refreshGapClass(index);
    refreshGapClass(index + 1);
    if (event.kind === "memory_tick") {
      strip.append(event.payload as MemoryTickPayload);
    } else if (event.kind === "response") {
      const p = event.payload as ResponsePayload;
      if (p.tts_audio) audio.enqueue(mediaUrl(p.tts_audio.media_url));
    }
  };

  let closeEvents: (() => void) | null = null;
  let closeFrames: (() => void) | null = null;
  let framesRejected = false;

  const onEventsState = (state: SocketState) => {
    switch (state) {
      case "open":
        setBanner(`connected to ${streamId}`);
        break;
      case "connecting":
        setBanner("connecting…");
        break;
      case "reconnecting":
        setBanner("connection lost, reconnecting…", "error");
        break;
      case "rejected":
        setBanner(`unknown stream "${streamId}"`, "error");
        break;
      case "closed":
        if (!framesRejected) setBanner("disconnected");
        break;
    }
  };

  void (async () => {
    setBanner("connecting…");
    let status;
    try {
      status = await fetchStatus(base, streamId);
    } catch {
      setBanner("backend unreachable", "error");
      return;
    }
    if (status === null) {
      setBanner(`unknown stream "${streamId}"`, "error");
      return;
    }
    try {
      const memory = await fetchMemory(base, streamId);
      strip.setEntries(memory.entries);
    } catch {
      // timeline fills from memory_tick events instead
    }
    closeEvents = openEvents(base, streamId, onEvent, onEventsState, opts.socket);
    closeFrames = openFrames(
      base,
      streamId,
      (frame) => {
        frameView.src = `data:image/jpeg;base64,${frame.jpeg_b64}`;
        frameTime.textContent = `${frame.media_time.toFixed(1)}s`;
      },
      (state) => {
        if (state === "rejected") {
          framesRejected = true;
          setBanner(`unknown stream "${streamId}"`, "error");
        }
      },
      opts.socket,
    );
  })();

  input.addEventListener("input", () => {
    send.disabled = input.value.trim() === "";
  });

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (text === "") return;
    const pending = document.createElement("li");
    pending.className = "event pending";
    pending.append(
      Object.assign(document.createElement("p"), { className: "response-query", textContent: text }),
      Object.assign(document.createElement("span"), { className: "spinner", textContent: "…" }),
    );
    pendingBox.appendChild(pending);
    input.disabled = true;
    send.disabled = true;
    void postQuery(base, streamId, text).then((result) => {
      input.disabled = false;
      input.value = "";
      send.disabled = true;
      if (result.ok) {
        pending.remove(); // the mirrored event renders the canonical row
        return;
      }
      pending.querySelector(".spinner")?.remove();
      pending.classList.add("error-response");
      const message =
        result.status === 408
          ? "timed out waiting for the assistant"
          : `request failed (${result.status}): ${result.detail ?? ""}`;
      pending.appendChild(
        Object.assign(document.createElement("p"), {
          className: "query-error",
          textContent: message,
        }),
      );
    });
  });

  return {
    stop() {
      closeEvents?.();
      closeFrames?.();
    },
  };
}
