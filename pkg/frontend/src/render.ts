// DOM builders for log rows and the memory timeline strip.

import type {
  GeneratedClip,
  GroundingHit,
  MemoryEntry,
  MemoryTickPayload,
  ResponsePayload,
  RetrievalHit,
  StateChangePayload,
  StepSummary,
  UiEvent,
} from "./types.js";

export interface RenderHandlers {
  /** Called when a grounding timestamp chip is clicked. */
  seek: (hit: GroundingHit) => void;
  /** Resolves a backend-relative media url (e.g. /media/m-3) for src attributes. */
  mediaUrl: (path: string) => string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderEvent(event: UiEvent, handlers: RenderHandlers): HTMLLIElement {
  const row = el("li", `event ev-${event.kind.replace(/_/g, "-")}`);
  row.dataset.seq = String(event.seq);
  switch (event.kind) {
    case "memory_tick": {
      const p = event.payload as MemoryTickPayload;
      row.appendChild(el("span", "tick-span", `${p.t_start.toFixed(1)}-${p.t_end.toFixed(1)}s`));
      row.appendChild(el("span", "tick-desc", ` ${p.description}`));
      break;
    }
    case "state_change": {
      const p = event.payload as StateChangePayload;
      const text =
        p.scope === "stream" ? `stream ${p.state}` : `session: ${p.from} → ${p.to}`;
      row.appendChild(el("span", "state-text", text));
      if (p.scope === "stream" && p.state === "ended") row.classList.add("stream-ended");
      break;
    }
    case "error": {
      const p = event.payload as { code: string; message: string };
      row.appendChild(el("span", "error-code", p.code));
      row.appendChild(el("span", "error-message", ` ${p.message}`));
      break;
    }
    case "response": {
      renderResponse(row, event.payload as ResponsePayload, handlers);
      break;
    }
  }
  return row;
}

function renderResponse(row: HTMLLIElement, p: ResponsePayload, handlers: RenderHandlers): void {
  row.appendChild(el("p", "response-query", p.query));
  const text = el("p", "response-text", p.text);
  row.appendChild(text);
  if (p.error_code !== null) {
    row.classList.add("error-response");
    row.appendChild(el("span", "error-code", p.error_code));
    return;
  }
  switch (p.intent) {
    case "grounding": {
      const chips = el("div", "chips");
      for (const hit of p.media as GroundingHit[]) {
        const chip = el("button", "chip grounding-chip", hit.timestamp);
        chip.type = "button";
        chip.title = hit.description;
        chip.addEventListener("click", () => handlers.seek(hit));
        chips.appendChild(chip);
      }
      row.appendChild(chips);
      break;
    }
    case "retrieve": {
      const cards = el("div", "cards");
      for (const hit of p.media as RetrievalHit[]) {
        const card = el("div", "retrieval-card");
        card.appendChild(el("h4", "card-title", hit.title));
        card.appendChild(el("p", "card-meta", `${hit.video_id} · ${hit.duration_s.toFixed(0)}s`));
        card.appendChild(el("p", "card-score", hit.score.toFixed(3)));
        cards.appendChild(card);
      }
      row.appendChild(cards);
      break;
    }
    case "generate": {
      const clip = (p.media as GeneratedClip[])[0];
      if (!clip || !clip.media_url) break; // text-only fallback
      const box = el("div", "clip-player");
      const video = el("video", "clip-video");
      video.loop = true;
      video.muted = true;
      video.autoplay = true;
      video.src = handlers.mediaUrl(clip.media_url);
      // mock backends serve a still image under the same url
      video.addEventListener(
        "error",
        () => {
          const img = el("img", "clip-still");
          img.src = handlers.mediaUrl(clip.media_url);
          video.replaceWith(img);
        },
        { once: true },
      );
      box.appendChild(video);
      box.appendChild(el("p", "clip-caption", `${clip.duration_s.toFixed(1)}s preview`));
      row.appendChild(box);
      break;
    }
    case "summarize": {
      const summary = (p.media as StepSummary[])[0];
      if (!summary) break;
      const steps = el("ol", "steps");
      for (const step of summary.steps) {
        steps.appendChild(el("li", "step", `${step.t_start.toFixed(1)}s ${step.text}`));
      }
      row.appendChild(steps);
      break;
    }
  }
}

export class TimelineStrip {
  private byId = new Map<number, HTMLButtonElement>();

  constructor(private container: HTMLElement) {}

  setEntries(entries: MemoryEntry[]): void {
    this.container.textContent = "";
    this.byId.clear();
    for (const entry of entries) this.append(entry);
  }

  append(entry: { id?: number; entry_id?: number; t_start: number; t_end: number; description: string }): void {
    const id = entry.id ?? entry.entry_id ?? -1;
    if (this.byId.has(id)) return;
    const chip = el("button", "mem-chip");
    chip.type = "button";
    chip.dataset.tStart = String(entry.t_start);
    chip.dataset.tEnd = String(entry.t_end);
    chip.appendChild(el("span", "mem-time", `${entry.t_start.toFixed(0)}s`));
    chip.appendChild(el("span", "mem-desc", entry.description));
    chip.addEventListener("click", () => this.highlight(chip));
    this.byId.set(id, chip);
    this.container.appendChild(chip);
  }

  /** Highlight the first chip overlapping [tStart, tEnd] and scroll it into view. */
  seek(tStart: number, tEnd: number): HTMLButtonElement | null {
    for (const chip of this.byId.values()) {
      const s = Number(chip.dataset.tStart);
      const e = Number(chip.dataset.tEnd);
      if (s < tEnd && tStart < e) {
        this.highlight(chip);
        return chip;
      }
    }
    return null;
  }

  private highlight(chip: HTMLButtonElement): void {
    for (const other of this.byId.values()) other.classList.remove("active");
    chip.classList.add("active");
    chip.scrollIntoView?.({ behavior: "smooth", inline: "center", block: "nearest" });
  }
}
