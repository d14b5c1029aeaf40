import { afterEach, describe, expect, it, vi } from "vitest";

import {
  ApiError,
  checkLatentDims,
  SoundmorphClient,
  type LatentMap,
  type Meta,
} from "../src/api.js";

const META: Meta = {
  arch: "CC",
  latent_dim: 3,
  input_len: 4096,
  num_classes: 10,
  sample_rate: 8000,
  decode_mode: "mean",
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function mockFetch(impl: (url: string, init?: RequestInit) => Response | Promise<Response>) {
  const spy = vi.fn(impl);
  vi.stubGlobal("fetch", spy);
  return spy;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("SoundmorphClient", () => {
  it("fetches /meta relative to the base url", async () => {
    const spy = mockFetch(() => jsonResponse(META));
    const client = new SoundmorphClient("http://svc:8000");
    expect(await client.meta()).toEqual(META);
    expect(spy).toHaveBeenCalledWith("http://svc:8000/meta");
  });

  it("posts the latent vector as-is and returns bytes plus the audio id", async () => {
    const payload = new Uint8Array([82, 73, 70, 70, 9, 9]);
    const spy = mockFetch(
      () =>
        new Response(payload, {
          status: 200,
          headers: { "Content-Type": "audio/wav", "X-Audio-Id": "abc123" },
        }),
    );
    const client = new SoundmorphClient("");
    const z = [0.25, -1.5, 3];
    const decoded = await client.decode(z);

    expect(decoded.audioId).toBe("abc123");
    expect(new Uint8Array(decoded.bytes)).toEqual(payload);
    const [url, init] = spy.mock.calls[0] as [string, RequestInit];
    expect(url).toBe("/decode");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({ z });
  });

  it("identical latent vectors serialize to identical request bodies", async () => {
    const bodies: string[] = [];
    mockFetch((_, init) => {
      bodies.push(init?.body as string);
      return new Response(new Uint8Array([1]), { status: 200 });
    });
    const client = new SoundmorphClient("");
    const z = [0.1 + 0.2, -7.25e-3, 42];
    await client.decode(z);
    await client.decode([...z]);
    expect(bodies[0]).toBe(bodies[1]);
  });

  it("morph fills default steps and gap", async () => {
    const spy = mockFetch(() =>
      jsonResponse({
        steps: [{ audio_id: "s0", url: "/audio/s0" }],
        concatenated: { audio_id: "c", url: "/audio/c" },
      }),
    );
    const client = new SoundmorphClient("");
    const morph = await client.morph([1], [2]);
    expect(morph.concatenated.audio_id).toBe("c");
    const body = JSON.parse(
      (spy.mock.calls[0] as [string, RequestInit])[1].body as string,
    );
    expect(body).toEqual({ z_start: [1], z_end: [2], steps: 10, gap_ms: 200 });
  });

  it("turns a string detail into an ApiError with the status", async () => {
    mockFetch(() => jsonResponse({ detail: "z must have length 3, got 2" }, 422));
    const client = new SoundmorphClient("");
    const err = await client.decode([1, 2]).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).message).toContain("length 3");
  });

  it("joins field-level details into one message", async () => {
    mockFetch(() =>
      jsonResponse(
        {
          detail: [
            { field: "body.steps", message: "must be >= 2" },
            { field: "body.z_start", message: "required" },
          ],
        },
        400,
      ),
    );
    const client = new SoundmorphClient("");
    const err = await client.morph([1], [2], 1).catch((e: unknown) => e);
    expect((err as ApiError).message).toBe(
      "body.steps: must be >= 2; body.z_start: required",
    );
  });

  it("survives a non-JSON error body", async () => {
    mockFetch(() => new Response("boom", { status: 500 }));
    const client = new SoundmorphClient("");
    const err = await client.latent().catch((e: unknown) => e);
    expect((err as ApiError).message).toContain("500");
  });

  it("builds replay urls from the audio id", () => {
    const client = new SoundmorphClient("http://svc:8000");
    expect(client.audioUrl("deadbeef")).toBe("http://svc:8000/audio/deadbeef");
  });
});

describe("checkLatentDims", () => {
  const map: LatentMap = {
    points: [{ source_id: "a.wav", label: 0, x: 0, y: 0, z: [1, 2, 3] }],
    centers: [{ label: 0, x: 0, y: 0, z: [1, 2, 3] }],
    explained_variance: [0.6, 0.2],
  };

  it("accepts matching dimensions", () => {
    expect(() => checkLatentDims(map, META)).not.toThrow();
  });

  it("rejects a point with the wrong z length", () => {
    const bad = {
      ...map,
      points: [{ ...map.points[0]!, z: [1, 2] }],
    };
    expect(() => checkLatentDims(bad, META)).toThrow(/a\.wav.*length 2/);
  });

  it("rejects a center with the wrong z length", () => {
    const bad = {
      ...map,
      centers: [{ label: 4, x: 0, y: 0, z: [1] }],
    };
    expect(() => checkLatentDims(bad, META)).toThrow(/center 4/);
  });
});
