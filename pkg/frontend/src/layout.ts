import { SessionState, UiPoint } from "./session.js";

/**
 * Pure geometry stage: SessionState in, drawable shapes out. The canvas
 * code below it only moves ink; everything about placement, shading and
 * emphasis is decided here where it can be unit tested.
 */

/** The eight words on the valence/arousal circle at their canonical angles. */
export const WORD_ANGLES: ReadonlyArray<readonly [string, number]> = [
  ["pleased", 0],
  ["excited", 45],
  ["aroused", 90],
  ["distressed", 135],
  ["miserable", 180],
  ["depressed", 225],
  ["sleepy", 270],
  ["content", 315],
];

export interface LayoutConfig {
  width: number;
  height: number;
  /** Fraction of the radius left free around the circle for the labels. */
  labelGap: number;
}

export const DEFAULT_LAYOUT: LayoutConfig = { width: 640, height: 640, labelGap: 0.18 };

export interface TrailDot {
  x: number;
  y: number;
  /** 0 = oldest and lightest, 1 = newest and darkest. */
  shade: number;
}

export interface WordLabel {
  word: string;
  x: number;
  y: number;
  emphasized: boolean;
}

export interface Marker {
  x: number;
  y: number;
  word: string;
}

export interface Layout {
  cx: number;
  cy: number;
  radius: number;
  words: WordLabel[];
  trail: TrailDot[];
  marker: Marker | null;
  banner: string | null;
  errors: number;
}

function project(p: { valence: number; arousal: number }, cx: number, cy: number, r: number) {
  // valence grows to the right, arousal grows upward (canvas y is flipped)
  return { x: cx + p.valence * r, y: cy - p.arousal * r };
}

function shadeOf(p: UiPoint, oldest: number, newest: number): number {
  if (newest <= oldest) {
    return 1;
  }
  return (p.t - oldest) / (newest - oldest);
}

function bannerFor(state: SessionState): string | null {
  switch (state.phase) {
    case "connecting":
      return "connecting…";
    case "disconnected":
      return "connection lost, retrying…";
    case "ended":
      return "stream ended";
    case "live":
      return null;
  }
}

export function layoutFrame(state: SessionState, cfg: LayoutConfig = DEFAULT_LAYOUT): Layout {
  const cx = cfg.width / 2;
  const cy = cfg.height / 2;
  const radius = (Math.min(cfg.width, cfg.height) / 2) * (1 - cfg.labelGap);

  const trail = state.trail;
  const newest = trail.length > 0 ? trail[trail.length - 1] : null;
  const dots: TrailDot[] = trail.map((p) => ({
    ...project(p, cx, cy, radius),
    shade: shadeOf(p, trail[0].t, trail[trail.length - 1].t),
  }));

  const labelRadius = radius * (1 + cfg.labelGap * 0.6);
  const words: WordLabel[] = WORD_ANGLES.map(([word, deg]) => {
    const rad = (deg * Math.PI) / 180;
    return {
      word,
      x: cx + labelRadius * Math.cos(rad),
      y: cy - labelRadius * Math.sin(rad),
      emphasized: newest !== null && newest.word === word,
    };
  });

  return {
    cx,
    cy,
    radius,
    words,
    trail: dots,
    marker: newest === null ? null : { ...project(newest, cx, cy, radius), word: newest.word },
    banner: bannerFor(state),
    errors: state.errors,
  };
}
