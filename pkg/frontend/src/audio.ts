// TTS playback queue. Responses can arrive faster than their audio plays,
// so clips queue up and exactly one <audio> element plays at a time.

export class AudioQueue {
  private pending: string[] = [];
  private current: HTMLAudioElement | null = null;

  constructor(
    private host: HTMLElement,
    private factory: () => HTMLAudioElement = () => document.createElement("audio"),
  ) {}

  enqueue(url: string): void {
    this.pending.push(url);
    if (this.current === null) this.playNext();
  }

  /** The element currently playing, if any. */
  get playing(): HTMLAudioElement | null {
    return this.current;
  }

  get queuedCount(): number {
    return this.pending.length;
  }

  private playNext(): void {
    const url = this.pending.shift();
    if (url === undefined) {
      this.current = null;
      return;
    }
    const el = this.factory();
    el.src = url;
    let done = false;
    const advance = () => {
      if (done) return; // 'ended' and a play() rejection must not both advance
      done = true;
      el.remove();
      this.playNext();
    };
    el.addEventListener("ended", advance, { once: true });
    el.addEventListener("error", advance, { once: true });
    this.host.appendChild(el);
    this.current = el;
    const attempt = el.play();
    // autoplay refusals must not wedge the queue
    if (attempt && typeof attempt.catch === "function") attempt.catch(advance);
  }
}
