import { Layout } from "./layout.js";

// Light text for the word ring, dark ink for the data. Trail shade 0..1
// maps from a pale blue-gray to nearly black.

const CIRCLE_COLOR = "#c9ccd4";
const AXIS_COLOR = "#e3e5ea";
const WORD_LIGHT = "#a8adb8";
const WORD_DARK = "#14161a";
const MARKER_COLOR = "#14161a";
const BACKGROUND = "#fafbfc";

function trailColor(shade: number): string {
  const light = 82 - shade * 64; // 82% lightness down to 18%
  return `hsl(222 12% ${light.toFixed(1)}%)`;
}

export function render(ctx: CanvasRenderingContext2D, layout: Layout): void {
  const { cx, cy, radius } = layout;
  ctx.save();
  ctx.fillStyle = BACKGROUND;
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);

  ctx.strokeStyle = AXIS_COLOR;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(cx - radius, cy);
  ctx.lineTo(cx + radius, cy);
  ctx.moveTo(cx, cy - radius);
  ctx.lineTo(cx, cy + radius);
  ctx.stroke();

  ctx.strokeStyle = CIRCLE_COLOR;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, 0, Math.PI * 2);
  ctx.stroke();

  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  for (const label of layout.words) {
    ctx.font = label.emphasized ? "bold 16px system-ui" : "13px system-ui";
    ctx.fillStyle = label.emphasized ? WORD_DARK : WORD_LIGHT;
    ctx.fillText(label.word, label.x, label.y);
  }

  for (const dot of layout.trail) {
    ctx.fillStyle = trailColor(dot.shade);
    ctx.beginPath();
    ctx.arc(dot.x, dot.y, 3.5, 0, Math.PI * 2);
    ctx.fill();
  }

  if (layout.marker !== null) {
    ctx.fillStyle = MARKER_COLOR;
    ctx.beginPath();
    ctx.arc(layout.marker.x, layout.marker.y, 6, 0, Math.PI * 2);
    ctx.fill();
  }

  if (layout.banner !== null) {
    ctx.font = "14px system-ui";
    ctx.fillStyle = WORD_DARK;
    ctx.textAlign = "left";
    ctx.fillText(layout.banner, 12, 20);
  }
  ctx.restore();
}
