// World (meters) to canvas (pixels) mapping, fitted to the content with a
// margin, y axis pointing up.

export interface Viewport {
  scale: number; // px per meter
  offsetX: number;
  offsetY: number;
  width: number;
  height: number;
}

export interface Bounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

export function contentBounds(points: [number, number][]): Bounds {
  if (points.length === 0) {
    return { minX: -1, maxX: 1, minY: -1, maxY: 1 };
  }
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  return { minX, maxX, minY, maxY };
}

export function fitViewport(
  bounds: Bounds,
  width: number,
  height: number,
  margin = 0.1,
): Viewport {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min(
    width / (spanX * (1 + 2 * margin)),
    height / (spanY * (1 + 2 * margin)),
  );
  const cx = (bounds.minX + bounds.maxX) / 2;
  const cy = (bounds.minY + bounds.maxY) / 2;
  return {
    scale,
    offsetX: width / 2 - cx * scale,
    offsetY: height / 2 + cy * scale,
    width,
    height,
  };
}

export function toScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.offsetX + x * vp.scale, vp.offsetY - y * vp.scale];
}

export function toWorld(vp: Viewport, px: number, py: number): [number, number] {
  return [(px - vp.offsetX) / vp.scale, (vp.offsetY - py) / vp.scale];
}
