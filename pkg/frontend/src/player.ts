/** WAV payload inspection and playback. */

export interface WavInfo {
  sampleRate: number;
  channels: number;
  bitsPerSample: number;
  numSamples: number;
  dataOffset: number;
  dataLength: number;
}

function fourcc(view: DataView, offset: number): string {
  return String.fromCharCode(
    view.getUint8(offset),
    view.getUint8(offset + 1),
    view.getUint8(offset + 2),
    view.getUint8(offset + 3),
  );
}

/** Parse a 16-bit PCM WAV header; throws on anything else. */
export function parseWavHeader(buf: ArrayBuffer): WavInfo {
  const view = new DataView(buf);
  if (buf.byteLength < 44 || fourcc(view, 0) !== "RIFF" || fourcc(view, 8) !== "WAVE") {
    throw new Error("not a RIFF/WAVE payload");
  }

  let offset = 12;
  let fmt: { channels: number; sampleRate: number; bits: number } | null = null;
  let data: { offset: number; length: number } | null = null;
  while (offset + 8 <= buf.byteLength) {
    const id = fourcc(view, offset);
    const size = view.getUint32(offset + 4, true);
    if (id === "fmt ") {
      const format = view.getUint16(offset + 8, true);
      if (format !== 1) throw new Error(`unsupported WAV format code ${format}`);
      fmt = {
        channels: view.getUint16(offset + 10, true),
        sampleRate: view.getUint32(offset + 12, true),
        bits: view.getUint16(offset + 22, true),
      };
    } else if (id === "data") {
      data = { offset: offset + 8, length: size };
    }
    offset += 8 + size + (size % 2); // chunks are word-aligned
  }

  if (!fmt || !data) throw new Error("WAV payload is missing fmt or data chunk");
  if (fmt.bits !== 16) throw new Error(`expected 16-bit PCM, got ${fmt.bits}`);
  const bytesPerFrame = (fmt.bits / 8) * fmt.channels;
  return {
    sampleRate: fmt.sampleRate,
    channels: fmt.channels,
    bitsPerSample: fmt.bits,
    numSamples: Math.floor(data.length / bytesPerFrame),
    dataOffset: data.offset,
    dataLength: data.length,
  };
}

/** First-channel samples rescaled to [-1, 1). */
export function wavSamples(buf: ArrayBuffer): Float32Array {
  const info = parseWavHeader(buf);
  const view = new DataView(buf);
  const out = new Float32Array(info.numSamples);
  const stride = 2 * info.channels;
  for (let i = 0; i < info.numSamples; i++) {
    out[i] = view.getInt16(info.dataOffset + i * stride, true) / 32768;
  }
  return out;
}

export function drawWaveform(canvas: HTMLCanvasElement, samples: Float32Array): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#2d5aa0";
  ctx.beginPath();
  const mid = height / 2;
  for (let x = 0; x < width; x++) {
    // min/max envelope per pixel column
    const lo = Math.floor((x / width) * samples.length);
    const hi = Math.max(lo + 1, Math.floor(((x + 1) / width) * samples.length));
    let mn = 1.0;
    let mx = -1.0;
    for (let i = lo; i < hi && i < samples.length; i++) {
      const s = samples[i] as number;
      mn = Math.min(mn, s);
      mx = Math.max(mx, s);
    }
    ctx.moveTo(x + 0.5, mid - mx * (mid - 2));
    ctx.lineTo(x + 0.5, mid - mn * (mid - 2));
  }
  ctx.stroke();
}

/** Plays service WAV payloads, recycling the previous object URL. */
export class AudioPlayer {
  private url: string | null = null;

  constructor(private readonly element: HTMLAudioElement) {}

  play(bytes: ArrayBuffer): void {
    if (this.url) URL.revokeObjectURL(this.url);
    this.url = URL.createObjectURL(new Blob([bytes], { type: "audio/wav" }));
    this.element.src = this.url;
    void this.element.play();
  }
}
