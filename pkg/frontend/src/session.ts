import { parseFrame, PointFrame } from "./types.js";

/** Seconds of history the trail keeps, measured on stream time. */
export const TRAIL_SECONDS = 180;

export type Phase = "connecting" | "live" | "ended" | "disconnected";

export interface UiPoint {
  t: number;
  valence: number;
  arousal: number;
  word: string;
}

export interface SessionState {
  phase: Phase;
  /** Accepted points in arrival order, oldest first, capped to TRAIL_SECONDS. */
  trail: UiPoint[];
  /** Count of frames dropped as malformed or out of range. */
  errors: number;
  /** Last state string reported by a status frame, if any. */
  serverState: string | null;
}

function inUnitSquare(p: PointFrame): boolean {
  return Math.abs(p.valence) <= 1 && Math.abs(p.arousal) <= 1;
}

/**
 * Holds everything the renderer needs. The socket layer feeds raw messages
 * in; rendering reads the state snapshot out. Nothing here talks back to
 * the server, so the decode pipeline cannot be disturbed from this side.
 */
export class Session {
  private state: SessionState = {
    phase: "connecting",
    trail: [],
    errors: 0,
    serverState: null,
  };

  getState(): SessionState {
    return this.state;
  }

  /** Feed one raw socket message. Returns true if the state changed. */
  handleMessage(raw: string): boolean {
    const frame = parseFrame(raw);
    if (frame === null) {
      this.state.errors += 1;
      return true;
    }
    switch (frame.kind) {
      case "point":
        return this.acceptPoint(frame);
      case "status":
        this.state.serverState = frame.state;
        return true;
      case "end":
        this.state.phase = "ended";
        return true;
    }
  }

  private acceptPoint(frame: PointFrame): boolean {
    if (this.state.phase === "ended") {
      // the trail is frozen once the stream has ended
      return false;
    }
    if (!inUnitSquare(frame)) {
      this.state.errors += 1;
      return true;
    }
    this.state.phase = "live";
    const trail = this.state.trail;
    trail.push({
      t: frame.t,
      valence: frame.valence,
      arousal: frame.arousal,
      word: frame.word,
    });
    const cutoff = frame.t - TRAIL_SECONDS;
    let drop = 0;
    while (drop < trail.length - 1 && trail[drop].t < cutoff) {
      drop += 1;
    }
    if (drop > 0) {
      trail.splice(0, drop);
    }
    return true;
  }

  noteConnected(): void {
    if (this.state.phase === "connecting" || this.state.phase === "disconnected") {
      this.state.phase = this.state.trail.length > 0 ? "live" : "connecting";
    }
  }

  noteDisconnected(): void {
    if (this.state.phase !== "ended") {
      this.state.phase = "disconnected";
    }
  }
}
