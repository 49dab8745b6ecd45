// Price panel: one line per dealer mid plus the global mean, with vertical
// markers at the ticks where interventions were acknowledged. Gaps in the
// stream stay gaps; nothing is interpolated or recomputed client-side.

import { FrameStore } from "./frames.js";
import { CommandVerb } from "./types.js";

export interface Marker {
  tick: number;
  verb: CommandVerb;
}

const MARKED: CommandVerb[] = ["crash", "force_short", "remove_value_investors", "reset"];

export class PricePanel {
  readonly markers: Marker[] = [];

  constructor(
    readonly store: FrameStore,
    private readonly canvas?: HTMLCanvasElement,
  ) {}

  noteAck(verb: CommandVerb, effectiveTick: number): void {
    if (MARKED.includes(verb)) {
      this.markers.push({ tick: effectiveTick, verb });
    }
  }

  /** Everything the draw call needs, kept pure for contract tests. */
  viewModel() {
    const { ticks, perDealer, mean } = this.store.midSeries();
    let lo = Infinity;
    let hi = -Infinity;
    for (const series of perDealer) {
      for (const v of series) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    if (!Number.isFinite(lo)) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-9) {
      hi = lo + 1;
    }
    return {
      ticks,
      perDealer,
      mean,
      lo,
      hi,
      markers: this.markers.filter(
        (m) => ticks.length > 0 && m.tick >= ticks[0] && m.tick <= ticks[ticks.length - 1],
      ),
    };
  }

  draw(): void {
    if (!this.canvas) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    const vm = this.viewModel();
    ctx.clearRect(0, 0, width, height);
    if (vm.ticks.length < 2) return;
    const t0 = vm.ticks[0];
    const t1 = vm.ticks[vm.ticks.length - 1];
    const x = (tick: number) => ((tick - t0) / (t1 - t0)) * (width - 50) + 40;
    const y = (v: number) => height - 20 - ((v - vm.lo) / (vm.hi - vm.lo)) * (height - 40);

    ctx.strokeStyle = "#ddd";
    ctx.beginPath();
    for (const level of [vm.lo, (vm.lo + vm.hi) / 2, vm.hi]) {
      ctx.moveTo(40, y(level));
      ctx.lineTo(width - 10, y(level));
    }
    ctx.stroke();
    ctx.fillStyle = "#666";
    ctx.font = "10px sans-serif";
    ctx.fillText(vm.hi.toFixed(1), 2, y(vm.hi) + 3);
    ctx.fillText(vm.lo.toFixed(1), 2, y(vm.lo) + 3);

    vm.perDealer.forEach((series, m) => {
      ctx.strokeStyle = `hsl(${(m * 360) / vm.perDealer.length}, 60%, 60%)`;
      ctx.lineWidth = 1;
      ctx.beginPath();
      series.forEach((v, i) => {
        if (i === 0) ctx.moveTo(x(vm.ticks[i]), y(v));
        else ctx.lineTo(x(vm.ticks[i]), y(v));
      });
      ctx.stroke();
    });

    ctx.strokeStyle = "#111";
    ctx.lineWidth = 2;
    ctx.beginPath();
    vm.mean.forEach((v, i) => {
      if (i === 0) ctx.moveTo(x(vm.ticks[i]), y(v));
      else ctx.lineTo(x(vm.ticks[i]), y(v));
    });
    ctx.stroke();

    for (const marker of vm.markers) {
      ctx.strokeStyle = "#d22";
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(x(marker.tick), 10);
      ctx.lineTo(x(marker.tick), height - 10);
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.fillStyle = "#d22";
      ctx.fillText(marker.verb, Math.min(x(marker.tick) + 2, width - 60), 14);
    }
  }
}
