// Canvas <-> image coordinate mapping. Zoom and pan are display-only;
// annotations always live in integer image pixels, and the mapping is
// exact at any zoom level because pixel (u, v) owns the half-open canvas
// square [u*scale+ox, (u+1)*scale+ox) x [...].

export interface View {
  scale: number; // canvas pixels per image pixel, > 0
  offsetX: number;
  offsetY: number;
}

export function canvasToImage(
  view: View,
  canvasX: number,
  canvasY: number,
): [number, number] {
  return [
    Math.floor((canvasX - view.offsetX) / view.scale),
    Math.floor((canvasY - view.offsetY) / view.scale),
  ];
}

export function imageToCanvas(view: View, u: number, v: number): [number, number] {
  // center of the image pixel's square on the canvas
  return [
    view.offsetX + (u + 0.5) * view.scale,
    view.offsetY + (v + 0.5) * view.scale,
  ];
}

export function inBounds(width: number, height: number, u: number, v: number): boolean {
  return Number.isInteger(u) && Number.isInteger(v)
    && u >= 0 && u < width && v >= 0 && v < height;
}

/** Zoom about a canvas anchor point, keeping the anchored image point fixed. */
export function zoomAt(view: View, canvasX: number, canvasY: number, factor: number): View {
  const scale = Math.min(Math.max(view.scale * factor, 0.5), 64);
  const ratio = scale / view.scale;
  return {
    scale,
    offsetX: canvasX - (canvasX - view.offsetX) * ratio,
    offsetY: canvasY - (canvasY - view.offsetY) * ratio,
  };
}

export function panBy(view: View, dx: number, dy: number): View {
  return { ...view, offsetX: view.offsetX + dx, offsetY: view.offsetY + dy };
}

/** Initial view: integer scale that fits the image into the canvas. */
export function fitView(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): View {
  const scale = Math.max(1, Math.floor(Math.min(canvasW / imageW, canvasH / imageH)));
  return {
    scale,
    offsetX: Math.floor((canvasW - imageW * scale) / 2),
    offsetY: Math.floor((canvasH - imageH * scale) / 2),
  };
}
