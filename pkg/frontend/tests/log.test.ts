import { describe, expect, it } from "vitest";

import { EventLog } from "../src/log.js";
import type { UiEvent } from "../src/types.js";

function ev(seq: number): UiEvent {
  return { kind: "error", payload: { code: "x", message: String(seq) }, seq, t: seq };
}

describe("EventLog", () => {
  it("keeps events in seq order regardless of arrival order", () => {
    const log = new EventLog();
    for (const seq of [4, 1, 3, 2, 5]) log.insert(ev(seq));
    expect(log.all.map((e) => e.seq)).toEqual([1, 2, 3, 4, 5]);
  });

  it("returns the sorted index for each insert", () => {
    const log = new EventLog();
    expect(log.insert(ev(2))).toBe(0);
    expect(log.insert(ev(1))).toBe(0);
    expect(log.insert(ev(3))).toBe(2);
  });

  it("ignores duplicate seqs", () => {
    const log = new EventLog();
    expect(log.insert(ev(1))).toBe(0);
    expect(log.insert(ev(1))).toBe(-1);
    expect(log.size).toBe(1);
  });

  it("flags gaps between non-consecutive seqs", () => {
    const log = new EventLog();
    for (const seq of [1, 2, 5, 6]) log.insert(ev(seq));
    expect([0, 1, 2, 3].map((i) => log.hasGapBefore(i))).toEqual([false, false, true, false]);
  });

  it("flags a leading gap when the first seen seq is not 1", () => {
    const log = new EventLog();
    log.insert(ev(7));
    expect(log.hasGapBefore(0)).toBe(true);
  });

  it("heals a gap flag once the missing event arrives", () => {
    const log = new EventLog();
    log.insert(ev(1));
    log.insert(ev(3));
    expect(log.hasGapBefore(1)).toBe(true);
    log.insert(ev(2));
    expect([0, 1, 2].map((i) => log.hasGapBefore(i))).toEqual([false, false, false]);
  });
});
