/**
 * Explorer wiring: scatter view, anchor picking, scrub slider, morph export.
 *
 * All audio originates from service payloads; the only client-side math is
 * the linear slider→z mapping in morph.ts.
 */

import {
  checkLatentDims,
  SoundmorphClient,
  type CenterPoint,
  type LatentMap,
  type Meta,
  type ScatterPoint,
} from "./api.js";
import { lerp, ScrubScheduler } from "./morph.js";
import { colorFor, dataBounds, hitTest, makeTransform, type ToPixel } from "./scatter.js";
import { AudioPlayer, drawWaveform, wavSamples } from "./player.js";

type Anchor =
  | { kind: "point"; point: ScatterPoint }
  | { kind: "center"; center: CenterPoint };

function anchorZ(a: Anchor): number[] {
  return a.kind === "point" ? a.point.z : a.center.z;
}

function anchorName(a: Anchor): string {
  return a.kind === "point"
    ? `${a.point.source_id} (class ${a.point.label})`
    : `center of class ${a.center.label}`;
}

function sameAnchor(a: Anchor, b: Anchor): boolean {
  if (a.kind === "point" && b.kind === "point") {
    return a.point.source_id === b.point.source_id;
  }
  if (a.kind === "center" && b.kind === "center") {
    return a.center.label === b.center.label;
  }
  return false;
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

class Explorer {
  private readonly client = new SoundmorphClient("");
  private meta: Meta | null = null;
  private map: LatentMap | null = null;
  private anchorA: Anchor | null = null;
  private anchorB: Anchor | null = null;
  private nextSlot: "a" | "b" = "a";
  private toPixel: ToPixel | null = null;

  private readonly canvas = byId<HTMLCanvasElement>("scatter");
  private readonly waveCanvas = byId<HTMLCanvasElement>("waveform");
  private readonly slider = byId<HTMLInputElement>("position");
  private readonly player = new AudioPlayer(byId<HTMLAudioElement>("audio"));
  private readonly errorBox = byId<HTMLDivElement>("error");
  private readonly banner = byId<HTMLDivElement>("banner");
  private readonly status = byId<HTMLSpanElement>("status");

  private readonly scheduler = new ScrubScheduler(
    async (z) => {
      this.status.textContent = "decoding…";
      const { bytes } = await this.client.decode(z);
      return bytes;
    },
    (bytes) => {
      this.status.textContent = "";
      this.showError(null);
      this.player.play(bytes);
      drawWaveform(this.waveCanvas, wavSamples(bytes));
    },
    (err) => {
      this.status.textContent = "";
      this.showError(err.message); // slider stays usable
    },
  );

  async init(): Promise<void> {
    this.banner.hidden = true;
    try {
      const [meta, map] = await Promise.all([
        this.client.meta(),
        this.client.latent(),
      ]);
      checkLatentDims(map, meta);
      this.meta = meta;
      this.map = map;
    } catch (err) {
      // service unreachable or bad payload: show the retry banner
      this.banner.hidden = false;
      this.banner.querySelector("span")!.textContent =
        err instanceof Error ? err.message : String(err);
      return;
    }
    this.renderMeta();
    this.renderScatter();
    this.renderLegend();
  }

  private showError(message: string | null): void {
    this.errorBox.textContent = message ?? "";
    this.errorBox.hidden = message === null;
  }

  private renderMeta(): void {
    const m = this.meta!;
    const ev = this.map!.explained_variance
      .slice(0, 2)
      .map((v) => `${(v * 100).toFixed(1)}%`)
      .join(" + ");
    byId<HTMLSpanElement>("meta").textContent =
      `${m.arch} · latent ${m.latent_dim} · ${m.sample_rate} Hz · ` +
      `projection explains ${ev}`;
  }

  private renderScatter(): void {
    const map = this.map!;
    const ctx = this.canvas.getContext("2d")!;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    byId<HTMLDivElement>("empty").hidden = map.points.length > 0;
    if (map.points.length === 0) return;

    const bounds = dataBounds([...map.points, ...map.centers]);
    this.toPixel = makeTransform(bounds, this.canvas.width, this.canvas.height);

    for (const p of map.points) {
      const [px, py] = this.toPixel(p.x, p.y);
      ctx.fillStyle = colorFor(p.label);
      ctx.beginPath();
      ctx.arc(px, py, 3.5, 0, 2 * Math.PI);
      ctx.fill();
    }
    // centers as larger outlined squares so they read as pseudo-points
    for (const c of map.centers) {
      const [px, py] = this.toPixel(c.x, c.y);
      ctx.fillStyle = colorFor(c.label);
      ctx.strokeStyle = "#111";
      ctx.lineWidth = 1.5;
      ctx.fillRect(px - 6, py - 6, 12, 12);
      ctx.strokeRect(px - 6, py - 6, 12, 12);
    }
    for (const [anchor, color] of [
      [this.anchorA, "#111"],
      [this.anchorB, "#b00"],
    ] as const) {
      if (!anchor) continue;
      const pos = anchor.kind === "point" ? anchor.point : anchor.center;
      const [px, py] = this.toPixel(pos.x, pos.y);
      ctx.strokeStyle = color;
      ctx.lineWidth = 2.5;
      ctx.beginPath();
      ctx.arc(px, py, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  private renderLegend(): void {
    const legend = byId<HTMLUListElement>("legend");
    legend.replaceChildren();
    const labels = [...new Set(this.map!.points.map((p) => p.label))].sort(
      (x, y) => x - y,
    );
    for (const label of labels) {
      const li = document.createElement("li");
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.style.background = colorFor(label);
      li.append(chip, ` class ${label}`);
      legend.appendChild(li);
    }
  }

  private pickAnchor(ev: MouseEvent): void {
    if (!this.map || !this.toPixel) return;
    const rect = this.canvas.getBoundingClientRect();
    const px = ((ev.clientX - rect.left) / rect.width) * this.canvas.width;
    const py = ((ev.clientY - rect.top) / rect.height) * this.canvas.height;

    const items = [...this.map.points, ...this.map.centers].map((it) => {
      const [x, y] = this.toPixel!(it.x, it.y);
      return { x, y };
    });
    const idx = hitTest(items, px, py, 10);
    if (idx < 0) return;

    const anchor: Anchor =
      idx < this.map.points.length
        ? { kind: "point", point: this.map.points[idx] as ScatterPoint }
        : {
            kind: "center",
            center: this.map.centers[idx - this.map.points.length] as CenterPoint,
          };

    const other = this.nextSlot === "a" ? this.anchorB : this.anchorA;
    if (other && sameAnchor(anchor, other)) {
      this.showError("anchors must be distinct");
      return;
    }
    this.showError(null);
    if (this.nextSlot === "a") {
      this.anchorA = anchor;
      this.nextSlot = "b";
    } else {
      this.anchorB = anchor;
      this.nextSlot = "a";
    }
    byId<HTMLSpanElement>("anchor-a").textContent = this.anchorA
      ? anchorName(this.anchorA)
      : "—";
    byId<HTMLSpanElement>("anchor-b").textContent = this.anchorB
      ? anchorName(this.anchorB)
      : "—";
    this.renderScatter();
    this.onScrub(); // hear the newly picked anchor at the current position
  }

  private onScrub(): void {
    if (!this.anchorA || !this.anchorB) return;
    const p = Number(this.slider.value) / 1000;
    byId<HTMLSpanElement>("position-label").textContent = p.toFixed(3);
    this.scheduler.scrub(lerp(anchorZ(this.anchorA), anchorZ(this.anchorB), p));
  }

  private async exportMorph(): Promise<void> {
    if (!this.anchorA || !this.anchorB) {
      this.showError("pick two anchors first");
      return;
    }
    const steps = Number(byId<HTMLInputElement>("steps").value);
    const list = byId<HTMLUListElement>("steps-list");
    try {
      this.status.textContent = "rendering morph…";
      const morph = await this.client.morph(
        anchorZ(this.anchorA),
        anchorZ(this.anchorB),
        steps,
      );
      list.replaceChildren();
      morph.steps.forEach((step, i) => {
        const li = document.createElement("li");
        const audio = document.createElement("audio");
        audio.controls = true;
        audio.src = this.client.audioUrl(step.audio_id);
        li.append(`step ${i} `, audio);
        list.appendChild(li);
      });
      const link = byId<HTMLAnchorElement>("download");
      link.href = this.client.audioUrl(morph.concatenated.audio_id);
      link.hidden = false;
      this.showError(null);
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
    } finally {
      this.status.textContent = "";
    }
  }

  wire(): void {
    this.canvas.addEventListener("click", (ev) => this.pickAnchor(ev));
    this.slider.addEventListener("input", () => this.onScrub());
    byId<HTMLButtonElement>("export").addEventListener("click", () => {
      void this.exportMorph();
    });
    this.banner.querySelector("button")!.addEventListener("click", () => {
      void this.init();
    });
  }
}

const explorer = new Explorer();
explorer.wire();
void explorer.init();
