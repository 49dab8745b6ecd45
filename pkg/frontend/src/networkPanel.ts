// Force-directed network view: dealers render as large squares, investors
// as small circles, colored by the latest streamed inventory (red short,
// green long). Layout is cosmetic; all numbers come from service payloads.

import { Frame, NetworkDoc } from "./types.js";

interface LayoutNode {
  id: number;
  role: string;
  x: number;
  y: number;
  vx: number;
  vy: number;
}

export class ForceLayout {
  nodes: LayoutNode[] = [];
  edges: [number, number][] = [];
  private index = new Map<number, LayoutNode>();

  load(doc: NetworkDoc): void {
    this.nodes = doc.nodes.map((n, i) => ({
      id: n.id,
      role: n.role,
      x: Math.cos((2 * Math.PI * i) / doc.nodes.length),
      y: Math.sin((2 * Math.PI * i) / doc.nodes.length),
      vx: 0,
      vy: 0,
    }));
    this.edges = doc.edges;
    this.index = new Map(this.nodes.map((n) => [n.id, n]));
  }

  node(id: number): LayoutNode | undefined {
    return this.index.get(id);
  }

  /** One damped spring/repulsion step; returns total movement. */
  step(dt = 0.05): number {
    const repulsion = 0.08;
    const spring = 0.8;
    const restLength = 0.5;
    for (const a of this.nodes) {
      for (const b of this.nodes) {
        if (a === b) continue;
        const dx = a.x - b.x;
        const dy = a.y - b.y;
        const d2 = dx * dx + dy * dy + 1e-4;
        const f = repulsion / d2;
        a.vx += (dx / Math.sqrt(d2)) * f * dt;
        a.vy += (dy / Math.sqrt(d2)) * f * dt;
      }
    }
    for (const [u, v] of this.edges) {
      const a = this.index.get(u);
      const b = this.index.get(v);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const d = Math.sqrt(dx * dx + dy * dy) + 1e-9;
      const f = spring * (d - restLength) * dt;
      a.vx += (dx / d) * f;
      a.vy += (dy / d) * f;
      b.vx -= (dx / d) * f;
      b.vy -= (dy / d) * f;
    }
    let movement = 0;
    for (const n of this.nodes) {
      n.vx *= 0.85;
      n.vy *= 0.85;
      n.x += n.vx;
      n.y += n.vy;
      movement += Math.abs(n.vx) + Math.abs(n.vy);
    }
    return movement;
  }
}

export function inventoryColor(inventory: number, limit = 20): string {
  const scale = Math.max(-1, Math.min(1, inventory / limit));
  if (scale >= 0) {
    return `rgb(${Math.round(230 - 160 * scale)}, 230, ${Math.round(230 - 160 * scale)})`;
  }
  return `rgb(230, ${Math.round(230 + 160 * scale)}, ${Math.round(230 + 160 * scale)})`;
}

export class NetworkPanel {
  readonly layout = new ForceLayout();
  private doc?: NetworkDoc;
  private latestFrame?: Frame;

  constructor(private readonly canvas?: HTMLCanvasElement) {}

  setNetwork(doc: NetworkDoc): void {
    this.doc = doc;
    this.layout.load(doc);
    for (let i = 0; i < 300; i += 1) {
      if (this.layout.step() < 1e-3) break;
    }
  }

  setFrame(frame: Frame): void {
    this.latestFrame = frame;
  }

  /** Inventory shown for a node, straight from the latest frame. */
  displayedInventory(id: number): number | null {
    if (!this.latestFrame) return null;
    if (id < this.latestFrame.inventories.length) {
      return this.latestFrame.inventories[id];
    }
    const agent = this.latestFrame.agents.find((a) => a.id === id);
    return agent ? agent.inventory : null;
  }

  draw(): void {
    if (!this.canvas || !this.doc) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const xs = this.layout.nodes.map((n) => n.x);
    const ys = this.layout.nodes.map((n) => n.y);
    const lo = [Math.min(...xs), Math.min(...ys)];
    const hi = [Math.max(...xs), Math.max(...ys)];
    const px = (x: number) => ((x - lo[0]) / (hi[0] - lo[0] + 1e-9)) * (width - 60) + 30;
    const py = (y: number) => ((y - lo[1]) / (hi[1] - lo[1] + 1e-9)) * (height - 60) + 30;

    ctx.strokeStyle = "#bbb";
    for (const [u, v] of this.layout.edges) {
      const a = this.layout.node(u);
      const b = this.layout.node(v);
      if (!a || !b) continue;
      ctx.beginPath();
      ctx.moveTo(px(a.x), py(a.y));
      ctx.lineTo(px(b.x), py(b.y));
      ctx.stroke();
    }
    for (const n of this.layout.nodes) {
      const inventory = this.displayedInventory(n.id) ?? 0;
      ctx.fillStyle = inventoryColor(inventory);
      ctx.strokeStyle = "#333";
      if (n.role === "market_maker") {
        ctx.fillRect(px(n.x) - 9, py(n.y) - 9, 18, 18);
        ctx.strokeRect(px(n.x) - 9, py(n.y) - 9, 18, 18);
      } else {
        ctx.beginPath();
        ctx.arc(px(n.x), py(n.y), n.role === "value_investor" ? 6 : 7, 0, 2 * Math.PI);
        ctx.fill();
        ctx.stroke();
      }
      ctx.fillStyle = "#222";
      ctx.font = "9px sans-serif";
      ctx.fillText(String(n.id), px(n.x) + 8, py(n.y) - 8);
    }
  }
}
