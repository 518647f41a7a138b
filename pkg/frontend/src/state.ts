import type {
  CameraParamsMsg,
  CompareMode,
  DenoiseResponse,
  SweepAxis,
  SweepStep,
} from './types.js';
import { PARAM_RANGES, clamp } from './sliders.js';

export interface SliderParams {
  iso: number;
  shutter: number;
  fnum: number;
}

/** One browsing session: the source image, current controls, last result. */
export class SessionState {
  imageB64: string | undefined;
  defaults: SliderParams = { iso: 800, shutter: 30, fnum: 2.0 };
  params: SliderParams = { ...this.defaults };
  lastResponse: DenoiseResponse | undefined;
  lastResponseParams: SliderParams | undefined;
  sweepSteps: SweepStep[] = [];
  sweepAxis: SweepAxis = 'iso';
  compareMode: CompareMode = 'side-by-side';
  residualGain = 4;

  loadImage(imageB64: string, sidecar?: Partial<SliderParams>): void {
    this.imageB64 = imageB64;
    this.defaults = {
      iso: clamp(sidecar?.iso ?? 800, PARAM_RANGES.iso),
      shutter: clamp(sidecar?.shutter ?? 30, PARAM_RANGES.shutter),
      fnum: clamp(sidecar?.fnum ?? 2.0, PARAM_RANGES.fnum),
    };
    this.params = { ...this.defaults };
    this.lastResponse = undefined;
    this.lastResponseParams = undefined;
    this.sweepSteps = [];
  }

  setParam(axis: keyof SliderParams, value: number): SliderParams {
    const range = PARAM_RANGES[axis];
    this.params = { ...this.params, [axis]: clamp(value, range) };
    return this.params;
  }

  /** The displayed response is stored verbatim; the UI never re-derives pixels. */
  applyResponse(params: SliderParams, response: DenoiseResponse): void {
    this.lastResponse = response;
    this.lastResponseParams = { ...params };
  }

  /** Is the shown result current, or should a pending indicator be displayed? */
  resultIsCurrent(): boolean {
    if (!this.lastResponseParams) return false;
    const a = this.lastResponseParams;
    const b = this.params;
    return a.iso === b.iso && a.shutter === b.shutter && a.fnum === b.fnum;
  }

  toRequestParams(p?: SliderParams): CameraParamsMsg {
    const s = p ?? this.params;
    return { iso: s.iso, shutter_speed: s.shutter, f_number: s.fnum };
  }

  applySweep(axis: SweepAxis, steps: SweepStep[]): void {
    this.sweepAxis = axis;
    this.sweepSteps = steps;
  }

  /** Strip click: feed the chosen value back into the sliders. */
  selectSweepValue(value: number): SliderParams {
    const axisKey = this.sweepAxis === 'fnum' ? 'fnum' : this.sweepAxis === 'iso' ? 'iso' : 'shutter';
    return this.setParam(axisKey, value);
  }
}

export function parseSidecar(text: string): Partial<SliderParams> {
  const raw = JSON.parse(text) as Record<string, unknown>;
  const out: Partial<SliderParams> = {};
  if (typeof raw.iso === 'number') out.iso = raw.iso;
  if (typeof raw.shutter_speed === 'number') out.shutter = raw.shutter_speed;
  if (typeof raw.f_number === 'number') out.fnum = raw.f_number;
  return out;
}

export const DEFAULT_SWEEP_GRIDS: Record<SweepAxis, number[]> = {
  iso: [100, 400, 1600, 6400],
  shutter: [5, 15, 60, 250, 1000],
  fnum: [1.4, 2.8, 5.6, 11, 22],
};
