/**
 * Typed client for the soundmorph HTTP service.
 *
 * Every byte of audio the explorer plays comes from these calls — the UI
 * never synthesizes waveforms locally, so byte-level guarantees of the
 * service (content-addressed audio ids, identical payloads for identical
 * latents) carry through to what the user hears.
 */

export interface Meta {
  arch: string;
  latent_dim: number;
  input_len: number;
  num_classes: number;
  sample_rate: number;
  decode_mode: string;
}

export interface ScatterPoint {
  source_id: string;
  label: number;
  x: number;
  y: number;
  z: number[];
}

export interface CenterPoint {
  label: number;
  x: number;
  y: number;
  z: number[];
}

export interface LatentMap {
  points: ScatterPoint[];
  centers: CenterPoint[];
  explained_variance: number[];
}

export interface AudioRef {
  audio_id: string;
  url: string;
}

export interface MorphResponse {
  steps: AudioRef[];
  concatenated: AudioRef;
}

export interface DecodedAudio {
  bytes: ArrayBuffer;
  audioId: string;
}

/** Service-level failure with the HTTP status and a readable message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface FieldIssue {
  field: string;
  message: string;
}

function detailMessage(status: number, body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    if (Array.isArray(detail)) {
      return detail
        .map((d: FieldIssue) => `${d.field}: ${d.message}`)
        .join("; ");
    }
  }
  return `request failed with status ${status}`;
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  throw new ApiError(response.status, detailMessage(response.status, body));
}

export class SoundmorphClient {
  constructor(readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  private async postJson(path: string, body: unknown): Promise<Response> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    return response;
  }

  meta(): Promise<Meta> {
    return this.getJson<Meta>("/meta");
  }

  latent(): Promise<LatentMap> {
    return this.getJson<LatentMap>("/latent");
  }

  /** Decode one latent vector to WAV bytes plus its content id. */
  async decode(z: number[]): Promise<DecodedAudio> {
    const response = await this.postJson("/decode", { z });
    return {
      bytes: await response.arrayBuffer(),
      audioId: response.headers.get("X-Audio-Id") ?? "",
    };
  }

  async morph(
    zStart: number[],
    zEnd: number[],
    steps = 10,
    gapMs = 200,
  ): Promise<MorphResponse> {
    const response = await this.postJson("/morph", {
      z_start: zStart,
      z_end: zEnd,
      steps,
      gap_ms: gapMs,
    });
    return (await response.json()) as MorphResponse;
  }

  async audio(audioId: string): Promise<ArrayBuffer> {
    const response = await fetch(this.audioUrl(audioId));
    await raiseForStatus(response);
    return response.arrayBuffer();
  }

  /** Stable replay URL for a rendered payload (usable as an <audio> src). */
  audioUrl(audioId: string): string {
    return `${this.baseUrl}/audio/${audioId}`;
  }
}

/** Every scatter point and center must carry a full-size latent vector. */
export function checkLatentDims(map: LatentMap, meta: Meta): void {
  for (const p of map.points) {
    if (p.z.length !== meta.latent_dim) {
      throw new Error(
        `point ${p.source_id} has z of length ${p.z.length}, ` +
          `expected ${meta.latent_dim}`,
      );
    }
  }
  for (const c of map.centers) {
    if (c.z.length !== meta.latent_dim) {
      throw new Error(
        `center ${c.label} has z of length ${c.z.length}, ` +
          `expected ${meta.latent_dim}`,
      );
    }
  }
}
