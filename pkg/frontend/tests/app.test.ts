import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { startApp, type AppHandle } from "../src/app.js";
import type { MemoryEntry, MemoryTickPayload, UiEvent } from "../src/types.js";
import { kitchenStatus, MockBackend } from "./mock-backend.js";
import recorded from "./fixtures/recorded-events.json";

const EVENTS = recorded as UiEvent[];

function memoryFromTicks(events: UiEvent[]): MemoryEntry[] {
  return events
    .filter((e) => e.kind === "memory_tick")
    .map((e) => {
      const p = e.payload as MemoryTickPayload;
      const mid = (p.t_start + p.t_end) / 2;
      return {
        id: p.entry_id,
        t_start: p.t_start,
        t_end: p.t_end,
        description: p.description,
        timestamp: `${mid.toFixed(1)}s`,
      };
    });
}

function stubAudio(): HTMLAudioElement {
  const el = document.createElement("audio");
  el.play = () => Promise.resolve();
  el.pause = () => {};
  return el;
}

describe("app against a live mock backend", () => {
  let backend: MockBackend;
  let base: string;
  let root: HTMLElement;
  let app: AppHandle | null = null;

  beforeEach(async () => {
    backend = new MockBackend();
    backend.streams.set("s-1", {
      status: kitchenStatus("s-1"),
      memory: memoryFromTicks(EVENTS),
      events: [...EVENTS],
    });
    base = await backend.start();
    document.body.innerHTML = "";
    root = document.createElement("div");
    document.body.appendChild(root);
  });

  afterEach(async () => {
    app?.stop();
    app = null;
    await backend.stop();
  });

  const start = (streamId: string, socket = {}) => {
    app = startApp(root, { base, streamId, socket, audioFactory: stubAudio });
  };

  it("shows the first frame within 2 seconds of connecting", async () => {
    const t0 = performance.now();
    start("s-1");
    const img = root.querySelector(".frame-view") as HTMLImageElement;
    await vi.waitFor(() => {
      expect(img.src.startsWith("data:image/jpeg;base64,")).toBe(true);
    });
    expect(performance.now() - t0).toBeLessThan(2000);
    expect(backend.framesConnections).toBe(1);
    await vi.waitFor(() => {
      expect(root.querySelector(".frame-time")?.textContent).toMatch(/s$/);
    });
  });

  it("renders the whole recorded stream: ordered log, timeline, chip, cards", async () => {
    start("s-1");
    await vi.waitFor(() => {
      expect(root.querySelectorAll(".event-log > .event").length).toBe(EVENTS.length);
    });
    const seqs = [...root.querySelectorAll(".event-log > .event")].map((row) =>
      Number((row as HTMLElement).dataset.seq),
    );
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    expect(root.querySelectorAll(".gap-before").length).toBe(0);
    // memory endpoint fills the strip before any tick event arrives
    expect(root.querySelectorAll(".mem-chip").length).toBe(23);
    expect(root.querySelector(".grounding-chip")?.textContent).toBe("58.0s");
    expect(root.querySelectorAll(".retrieval-card").length).toBe(3);
    expect(root.querySelector(".banner")?.textContent).toContain("connected");
    // clicking the chip highlights the matching timeline entry
    (root.querySelector(".grounding-chip") as HTMLButtonElement).click();
    const active = root.querySelector(".mem-chip.active") as HTMLElement;
    expect(active.querySelector(".mem-desc")?.textContent).toBe("adds sugar to the bowl");
  });

  it("shows an error banner for an unknown stream id", async () => {
    start("ghost");
    await vi.waitFor(() => {
      const banner = root.querySelector(".banner") as HTMLElement;
      expect(banner.classList.contains("error")).toBe(true);
      expect(banner.textContent).toContain('unknown stream "ghost"');
    });
    expect(backend.eventsConnections).toBe(0);
  });

  it("submits a query optimistically and renders the mirrored response", async () => {
    backend.queryDelayMs = 50;
    start("s-1");
    await vi.waitFor(() => {
      expect(root.querySelector(".banner")?.textContent).toContain("connected");
    });
    const input = root.querySelector(".query-input") as HTMLInputElement;
    const send = root.querySelector(".query-send") as HTMLButtonElement;
    input.value = "what is in the pan";
    input.dispatchEvent(new Event("input"));
    expect(send.disabled).toBe(false);
    root.querySelector("form")!.dispatchEvent(new Event("submit", { cancelable: true }));
    const pending = root.querySelector(".event.pending");
    expect(pending).not.toBeNull();
    expect(pending?.querySelector(".spinner")).not.toBeNull();
    expect(input.disabled).toBe(true);
    await vi.waitFor(() => {
      expect(root.querySelector(".event.pending")).toBeNull();
      const texts = [...root.querySelectorAll(".response-text")].map((p) => p.textContent);
      expect(texts).toContain("echo: what is in the pan");
    });
    expect(input.disabled).toBe(false);
    expect(input.value).toBe("");
    expect(send.disabled).toBe(true);
  });

  it("surfaces a 408 as a visible timeout message and re-enables input", async () => {
    backend.queryStatus = 408;
    start("s-1");
    await vi.waitFor(() => {
      expect(root.querySelector(".banner")?.textContent).toContain("connected");
    });
    const input = root.querySelector(".query-input") as HTMLInputElement;
    input.value = "too slow";
    input.dispatchEvent(new Event("input"));
    root.querySelector("form")!.dispatchEvent(new Event("submit", { cancelable: true }));
    await vi.waitFor(() => {
      expect(root.querySelector(".query-error")?.textContent).toContain("timed out");
    });
    expect((root.querySelector(".event.pending") as HTMLElement).classList.contains("error-response")).toBe(true);
    expect(input.disabled).toBe(false);
  });

  it("keeps submit disabled while the input is blank", async () => {
    start("s-1");
    const input = root.querySelector(".query-input") as HTMLInputElement;
    const send = root.querySelector(".query-send") as HTMLButtonElement;
    expect(send.disabled).toBe(true);
    input.value = "   ";
    input.dispatchEvent(new Event("input"));
    expect(send.disabled).toBe(true);
  });

  it("reconnects after a server drop and flags the missed events", async () => {
    backend.eventsBehavior = (ws, index, stream) => {
      if (index === 0) {
        for (const event of stream.events.slice(0, 5)) ws.send(JSON.stringify(event));
        setTimeout(() => ws.close(1012, "restarting"), 50);
      } else {
        // two events were dropped while the backend was away
        for (const event of stream.events.slice(7)) ws.send(JSON.stringify(event));
      }
    };
    const banners: string[] = [];
    start("s-1", { initialBackoffMs: 300, maxBackoffMs: 300 });
    const banner = root.querySelector(".banner") as HTMLElement;
    new MutationObserver(() => banners.push(banner.textContent ?? "")).observe(banner, {
      childList: true,
      characterData: true,
      subtree: true,
    });
    await vi.waitFor(
      () => {
        expect(backend.eventsConnections).toBeGreaterThanOrEqual(2);
        expect(root.querySelectorAll(".event-log > .event").length).toBe(EVENTS.length - 2);
      },
      { timeout: 5000 },
    );
    expect(banners.some((text) => text.includes("reconnecting"))).toBe(true);
    await vi.waitFor(() => {
      expect(root.querySelector(".banner")?.textContent).toContain("connected");
    });
    const flagged = [...root.querySelectorAll(".gap-before")];
    expect(flagged.length).toBe(1);
    expect((flagged[0] as HTMLElement).dataset.seq).toBe(String(EVENTS[7].seq));
  });
});
