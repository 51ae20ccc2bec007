// SVG arc gauges. The math is exported separately so it can be tested
// without a DOM.

const SWEEP_START = -120; // degrees, 240-degree arc
const SWEEP_END = 120;

export function gaugeFraction(value: number, min: number, max: number): number {
  if (max <= min) return 0;
  const fraction = (value - min) / (max - min);
  return fraction < 0 ? 0 : fraction > 1 ? 1 : fraction;
}

export function arcPath(fraction: number, radius = 44, cx = 50, cy = 54): string {
  const start = polar(SWEEP_START, radius, cx, cy);
  const angle = SWEEP_START + fraction * (SWEEP_END - SWEEP_START);
  const end = polar(angle, radius, cx, cy);
  const largeArc = fraction * 240 > 180 ? 1 : 0;
  return `M ${start.x.toFixed(2)} ${start.y.toFixed(2)} A ${radius} ${radius} 0 ${largeArc} 1 ${end.x.toFixed(2)} ${end.y.toFixed(2)}`;
}

function polar(angleDeg: number, radius: number, cx: number, cy: number) {
  const rad = ((angleDeg - 90) * Math.PI) / 180;
  return { x: cx + radius * Math.cos(rad), y: cy + radius * Math.sin(rad) };
}

export interface Gauge {
  element: HTMLElement;
  update(value: number | null): void;
  setMarker(value: number | null): void;
}

const SVG_NS = 'http://www.w3.org/2000/svg';

export function createGauge(
  label: string,
  min: number,
  max: number,
  render: (value: number) => string,
): Gauge {
  const root = document.createElement('div');
  root.className = 'gauge';

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', '0 0 100 100');

  const track = document.createElementNS(SVG_NS, 'path');
  track.setAttribute('class', 'gauge-track');
  track.setAttribute('d', arcPath(1));
  const fill = document.createElementNS(SVG_NS, 'path');
  fill.setAttribute('class', 'gauge-fill');
  const marker = document.createElementNS(SVG_NS, 'path');
  marker.setAttribute('class', 'gauge-marker');
  marker.setAttribute('visibility', 'hidden');
  const text = document.createElementNS(SVG_NS, 'text');
  text.setAttribute('class', 'gauge-value');
  text.setAttribute('x', '50');
  text.setAttribute('y', '60');
  text.setAttribute('text-anchor', 'middle');
  text.textContent = '--';

  svg.append(track, fill, marker, text);
  const caption = document.createElement('div');
  caption.className = 'gauge-label';
  caption.textContent = label;
  root.append(svg, caption);

  return {
    element: root,
    update(value) {
      if (value === null) {
        text.textContent = '--';
        fill.removeAttribute('d');
        return;
      }
      text.textContent = render(value);
      fill.setAttribute('d', arcPath(gaugeFraction(value, min, max)));
    },
    setMarker(value) {
      if (value === null) {
        marker.setAttribute('visibility', 'hidden');
        return;
      }
      marker.setAttribute('d', markerTick(gaugeFraction(value, min, max)));
      marker.setAttribute('visibility', 'visible');
    },
  };
}

function markerTick(fraction: number): string {
  const angle = SWEEP_START + fraction * (SWEEP_END - SWEEP_START);
  const inner = polar(angle, 38, 50, 54);
  const outer = polar(angle, 50, 50, 54);
  return `M ${inner.x.toFixed(2)} ${inner.y.toFixed(2)} L ${outer.x.toFixed(2)} ${outer.y.toFixed(2)}`;
}
