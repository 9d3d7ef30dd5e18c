import { describe, expect, it } from "vitest";

import { AudioQueue } from "../src/audio.js";

// jsdom's <audio> has no real playback, so playback state is scripted through
// a factory whose elements record play/pause transitions.
interface FakeAudio extends HTMLAudioElement {
  playingNow: boolean;
}

function makeFactory(created: FakeAudio[], playResult: "ok" | "reject" = "ok") {
  return (): HTMLAudioElement => {
    const el = document.createElement("audio") as FakeAudio;
    el.playingNow = false;
    el.play = () => {
      if (playResult === "reject") return Promise.reject(new Error("autoplay blocked"));
      el.playingNow = true;
      return Promise.resolve();
    };
    el.pause = () => {
      el.playingNow = false;
    };
    created.push(el);
    return el;
  };
}

const playingCount = (created: FakeAudio[]) =>
  created.filter((el) => el.playingNow && el.isConnected).length;

function makeHost(): HTMLElement {
  const host = document.createElement("div");
  document.body.appendChild(host);
  return host;
}

describe("AudioQueue", () => {
  it("plays at most one element at any instant across a full queue run", () => {
    const host = makeHost();
    const created: FakeAudio[] = [];
    const queue = new AudioQueue(host, makeFactory(created));

    queue.enqueue("/media/m-1");
    expect(playingCount(created)).toBe(1);
    queue.enqueue("/media/m-2");
    queue.enqueue("/media/m-3");
    // later clips wait their turn
    expect(playingCount(created)).toBe(1);
    expect(queue.queuedCount).toBe(2);

    for (let i = 0; i < 3; i++) {
      expect(playingCount(created)).toBeLessThanOrEqual(1);
      const current = created[i];
      expect(queue.playing).toBe(current);
      expect(current.src).toContain(`/media/m-${i + 1}`);
      current.playingNow = false;
      current.dispatchEvent(new Event("ended"));
      expect(playingCount(created)).toBeLessThanOrEqual(1);
    }
    expect(queue.playing).toBeNull();
    expect(created).toHaveLength(3);
    expect(host.childElementCount).toBe(0);
  });

  it("advances past a clip whose element errors", () => {
    const host = makeHost();
    const created: FakeAudio[] = [];
    const queue = new AudioQueue(host, makeFactory(created));
    queue.enqueue("/media/bad");
    queue.enqueue("/media/good");
    created[0].dispatchEvent(new Event("error"));
    expect(queue.playing).toBe(created[1]);
    expect(playingCount(created)).toBe(1);
  });

  it("advances when autoplay is refused instead of wedging", async () => {
    const host = makeHost();
    const created: FakeAudio[] = [];
    const queue = new AudioQueue(host, makeFactory(created, "reject"));
    queue.enqueue("/media/m-1");
    queue.enqueue("/media/m-2");
    await Promise.resolve();
    await Promise.resolve();
    // both rejected and were removed; the queue drained without throwing
    expect(queue.playing).toBeNull();
    expect(host.childElementCount).toBe(0);
  });

  it("does not double-advance when 'ended' follows an error", () => {
    const host = makeHost();
    const created: FakeAudio[] = [];
    const queue = new AudioQueue(host, makeFactory(created));
    queue.enqueue("/media/m-1");
    queue.enqueue("/media/m-2");
    queue.enqueue("/media/m-3");
    created[0].dispatchEvent(new Event("error"));
    created[0].dispatchEvent(new Event("ended")); // stale event for a removed element
    expect(queue.playing).toBe(created[1]);
    expect(queue.queuedCount).toBe(1);
  });
});
