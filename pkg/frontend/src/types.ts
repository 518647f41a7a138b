export interface CameraParamsMsg {
  iso: number;
  shutter_speed: number;
  f_number?: number;
  device_code?: number;
}

export interface DenoiseMetrics {
  tv_in: number;
  tv_out: number;
  residual_energy: number;
}

export interface DenoiseResponse {
  image: string; // base64 PNG, byte-identical to what the service produced
  residual?: string;
  metrics: DenoiseMetrics;
  condition_vector: number[];
  timing_ms: number;
}

export interface SweepStep {
  param: number;
  thumbnail: string;
  metrics: { tv: number; residual_energy: number; psnr?: number };
}

export interface SweepResponse {
  axis: string;
  steps: SweepStep[];
}

export type SweepAxis = 'iso' | 'shutter' | 'fnum';

export type CompareMode = 'side-by-side' | 'wipe' | 'residual';
