// Seq-ordered event store. The DOM list is derived from this, so the final
// view depends only on the set of events received, not their arrival order.

import type { UiEvent } from "./types.js";

export class EventLog {
  private events: UiEvent[] = [];
  private seen = new Set<number>();

  /** Insert one event; returns its sorted index, or -1 for a duplicate seq. */
  insert(event: UiEvent): number {
    if (this.seen.has(event.seq)) return -1;
    this.seen.add(event.seq);
    let lo = 0;
    let hi = this.events.length;
    while (lo < hi) {
      const mid = (lo + hi) >> 1;
      if (this.events[mid].seq < event.seq) lo = mid + 1;
      else hi = mid;
    }
    this.events.splice(lo, 0, event);
    return lo;
  }

  get all(): readonly UiEvent[] {
    return this.events;
  }

  get size(): number {
    return this.events.length;
  }

  /** True when the event at index does not directly follow its predecessor. */
  hasGapBefore(index: number): boolean {
    if (index < 0 || index >= this.events.length) return false;
    if (index === 0) return this.events[0].seq !== 1;
    return this.events[index].seq !== this.events[index - 1].seq + 1;
  }
}
