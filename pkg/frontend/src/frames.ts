// Ring buffer of recent stream frames. Holds the newest `capacity` frames;
// full history lives server-side, so overflow simply drops the oldest.

import { Frame } from "./types.js";

export class FrameStore {
  private frames: Frame[] = [];
  private start = 0;

  constructor(readonly capacity = 10_000) {}

  get size(): number {
    return this.frames.length - this.start;
  }

  push(frame: Frame): void {
    this.frames.push(frame);
    if (this.size > this.capacity) {
      this.start += 1;
      if (this.start > this.capacity) {
        this.frames = this.frames.slice(this.start);
        this.start = 0;
      }
    }
  }

  latest(): Frame | undefined {
    return this.size ? this.frames[this.frames.length - 1] : undefined;
  }

  all(): Frame[] {
    return this.frames.slice(this.start);
  }

  clear(): void {
    this.frames = [];
    this.start = 0;
  }

  /** Per-dealer mid series in frame order, one array per dealer. */
  midSeries(): { ticks: number[]; perDealer: number[][]; mean: number[] } {
    const window = this.all();
    const ticks = window.map((f) => f.tick);
    const mean = window.map((f) => f.mean_mid);
    const nDealers = window.length ? window[0].mids.length : 0;
    const perDealer: number[][] = [];
    for (let m = 0; m < nDealers; m += 1) {
      perDealer.push(window.map((f) => f.mids[m]));
    }
    return { ticks, perDealer, mean };
  }
}
