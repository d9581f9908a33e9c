// Wire frames as the stream server sends them. One JSON object per message.

export interface PointFrame {
  kind: "point";
  t: number;
  valence: number;
  arousal: number;
  word: string;
}

export interface StatusFrame {
  kind: "status";
  state: string;
}

export interface EndFrame {
  kind: "end";
}

export type StreamFrame = PointFrame | StatusFrame | EndFrame;

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/**
 * Parse one raw socket message into a typed frame.
 *
 * Returns null for anything that is not a well-formed frame: broken JSON,
 * a non-object, an unknown kind, or missing / non-numeric point fields.
 * Range checks (valence and arousal within the unit square) are the
 * session's job, not the parser's.
 */
export function parseFrame(raw: string): StreamFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    return null;
  }
  const obj = data as Record<string, unknown>;
  switch (obj.kind) {
    case "point":
      if (
        isFiniteNumber(obj.t) &&
        isFiniteNumber(obj.valence) &&
        isFiniteNumber(obj.arousal) &&
        typeof obj.word === "string"
      ) {
        return {
          kind: "point",
          t: obj.t,
          valence: obj.valence,
          arousal: obj.arousal,
          word: obj.word,
        };
      }
      return null;
    case "status":
      return typeof obj.state === "string" ? { kind: "status", state: obj.state } : null;
    case "end":
      return { kind: "end" };
    default:
      return null;
  }
}
