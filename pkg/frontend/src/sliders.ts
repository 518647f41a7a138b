/** Slider <-> parameter mappings.
 *
 * ISO and shutter speed vary over decades, so their sliders are
 * log-scaled; F-number stays linear.  Every mapping clamps into the
 * configured range, mirroring the encoder's clamping rules.
 */

export interface Range {
  lo: number;
  hi: number;
}

export const PARAM_RANGES: Record<string, Range> = {
  iso: { lo: 50, hi: 25600 },
  shutter: { lo: 0.1, hi: 8000 },
  fnum: { lo: 1.0, hi: 22.0 },
};

export const SLIDER_STEPS = 1000;

export function clamp(value: number, range: Range): number {
  return Math.min(Math.max(value, range.lo), range.hi);
}

/** slider position in [0, SLIDER_STEPS] -> parameter value */
export function sliderToValue(pos: number, range: Range, log: boolean): number {
  const t = Math.min(Math.max(pos / SLIDER_STEPS, 0), 1);
  if (log) {
    const lnLo = Math.log(range.lo);
    return Math.exp(lnLo + t * (Math.log(range.hi) - lnLo));
  }
  return range.lo + t * (range.hi - range.lo);
}

/** parameter value -> slider position in [0, SLIDER_STEPS] */
export function valueToSlider(value: number, range: Range, log: boolean): number {
  const v = clamp(value, range);
  let t: number;
  if (log) {
    t = (Math.log(v) - Math.log(range.lo)) / (Math.log(range.hi) - Math.log(range.lo));
  } else {
    t = (v - range.lo) / (range.hi - range.lo);
  }
  return Math.round(t * SLIDER_STEPS);
}

export function formatValue(axis: string, value: number): string {
  if (axis === 'iso') return `ISO ${Math.round(value)}`;
  if (axis === 'shutter') return `1/${value.toPrecision(3)} s`;
  return `f/${value.toFixed(1)}`;
}
