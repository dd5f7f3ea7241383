// Canvas painting: the top-down image under zoom/pan, committed markers
// from server state, staged markers and the polygon-in-progress preview.
// Guarded so logic tests can run without a 2D context (jsdom).

import type { View } from "./coords";
import { imageToCanvas } from "./coords";
import type { AnnotationSession } from "./session";

export const PICK_COLOR = "#e02424";   // red per the labeling convention
export const PLACE_COLOR = "#22b022";  // green
const POLYGON_COLOR = "#30a0e0";

function marker(
  ctx: CanvasRenderingContext2D,
  view: View,
  px: [number, number],
  color: string,
  staged: boolean,
): void {
  const [cx, cy] = imageToCanvas(view, px[0], px[1]);
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, Math.max(4, view.scale * 0.75), 0, Math.PI * 2);
  if (staged) {
    ctx.setLineDash([4, 3]);
    ctx.stroke();
    ctx.setLineDash([]);
  } else {
    ctx.stroke();
  }
  ctx.beginPath();
  ctx.arc(cx, cy, 1.5, 0, Math.PI * 2);
  ctx.fill();
}

export function drawScene(
  canvas: HTMLCanvasElement,
  view: View,
  image: CanvasImageSource | null,
  session: AnnotationSession,
): void {
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    return; // headless DOM without canvas support
  }
  if (!ctx) return;
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#16181d";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (image) {
    ctx.drawImage(
      image,
      view.offsetX,
      view.offsetY,
      session.width * view.scale,
      session.height * view.scale,
    );
  }
  const committed = session.committed.action;
  if (committed) {
    marker(ctx, view, committed.pick, PICK_COLOR, false);
    marker(ctx, view, committed.place, PLACE_COLOR, false);
  }
  if (session.stagedPick) marker(ctx, view, session.stagedPick, PICK_COLOR, true);
  if (session.stagedPlace) marker(ctx, view, session.stagedPlace, PLACE_COLOR, true);
  if (session.stagedPolygon.length > 0) {
    ctx.strokeStyle = POLYGON_COLOR;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    session.stagedPolygon.forEach((p, i) => {
      const [cx, cy] = imageToCanvas(view, p[0], p[1]);
      if (i === 0) ctx.moveTo(cx, cy);
      else ctx.lineTo(cx, cy);
    });
    ctx.stroke();
    if (session.stagedPolygon.length >= 2) {
      // closing edge preview back to the first vertex
      const first = session.stagedPolygon[0]!;
      const last = session.stagedPolygon[session.stagedPolygon.length - 1]!;
      const [fx, fy] = imageToCanvas(view, first[0], first[1]);
      const [lx, ly] = imageToCanvas(view, last[0], last[1]);
      ctx.setLineDash([3, 3]);
      ctx.beginPath();
      ctx.moveTo(lx, ly);
      ctx.lineTo(fx, fy);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    for (const p of session.stagedPolygon) {
      marker(ctx, view, p, POLYGON_COLOR, true);
    }
  }
}
