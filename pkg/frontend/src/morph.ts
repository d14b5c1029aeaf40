/** Slider-to-latent mapping and the decode scheduler behind scrubbing. */

/**
 * z = (1 - p) * zA + p * zB, elementwise.
 *
 * The endpoints are returned as exact copies of the anchors so that a
 * decode request at p=0 or p=1 is byte-identical to decoding the anchor
 * directly (same JSON body, same content-addressed response).
 */
export function lerp(zA: number[], zB: number[], p: number): number[] {
  if (zA.length !== zB.length) {
    throw new Error(`anchor dims differ: ${zA.length} vs ${zB.length}`);
  }
  if (p < 0 || p > 1 || !Number.isFinite(p)) {
    throw new Error(`position must be in [0, 1], got ${p}`);
  }
  if (p === 0) return zA.slice();
  if (p === 1) return zB.slice();
  return zA.map((a, i) => (1 - p) * a + p * (zB[i] as number));
}

/** Evenly spaced positions k/(steps-1), endpoints included. */
export function sliderPositions(steps: number): number[] {
  if (!Number.isInteger(steps) || steps < 2) {
    throw new Error(`steps must be an integer >= 2, got ${steps}`);
  }
  return Array.from({ length: steps }, (_, k) => k / (steps - 1));
}

export type DecodeFn = (z: number[]) => Promise<ArrayBuffer>;

/**
 * Debounced, single-in-flight decode pipeline for the scrub slider.
 *
 * Slider movements within the quiet window (150 ms by default) collapse
 * into one request; while a request is in flight, newer positions only
 * remember the latest z. Responses are matched to request sequence
 * numbers and anything superseded in the meantime is dropped, so the
 * audio that plays always corresponds to the newest slider position.
 */
export class ScrubScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private latest = 0;
  private inFlight = false;
  private queuedZ: number[] | null = null;

  constructor(
    private readonly decodeFn: DecodeFn,
    private readonly onAudio: (bytes: ArrayBuffer, z: number[]) => void,
    private readonly onError: (err: Error) => void,
    private readonly delayMs = 150,
  ) {}

  /** Note a new slider position; decodes after the quiet window. */
  scrub(z: number[]): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.request(z);
    }, this.delayMs);
  }

  private request(z: number[]): void {
    this.latest++;
    if (this.inFlight) {
      this.queuedZ = z;
      return;
    }
    void this.issue(this.latest, z);
  }

  private async issue(id: number, z: number[]): Promise<void> {
    this.inFlight = true;
    try {
      const bytes = await this.decodeFn(z);
      if (id === this.latest) this.onAudio(bytes, z);
    } catch (err) {
      if (id === this.latest) {
        this.onError(err instanceof Error ? err : new Error(String(err)));
      }
    } finally {
      this.inFlight = false;
      if (this.queuedZ !== null) {
        const next = this.queuedZ;
        this.queuedZ = null;
        void this.issue(this.latest, next);
      }
    }
  }
}
