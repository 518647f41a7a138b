import { ApiClient, ServiceError } from './api.js';
import { residualPixels } from './residual.js';
import { RequestScheduler } from './scheduler.js';
import {
  PARAM_RANGES,
  SLIDER_STEPS,
  formatValue,
  sliderToValue,
  valueToSlider,
} from './sliders.js';
import { DEFAULT_SWEEP_GRIDS, SessionState, SliderParams, parseSidecar } from './state.js';
import type { DenoiseResponse, SweepAxis } from './types.js';

const api = new ApiClient('');
const state = new SessionState();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const fileInput = $<HTMLInputElement>('file-input');
const sidecarInput = $<HTMLInputElement>('sidecar-input');
const inputImg = $<HTMLImageElement>('input-img');
const outputImg = $<HTMLImageElement>('output-img');
const wipeInput = $<HTMLInputElement>('wipe-range');
const residualCanvas = $<HTMLCanvasElement>('residual-canvas');
const errorBanner = $<HTMLDivElement>('error-banner');
const pendingChip = $<HTMLSpanElement>('pending-chip');
const metricsBox = $<HTMLDivElement>('metrics');
const stripBox = $<HTMLDivElement>('sweep-strip');

const sliderDefs: { axis: keyof SliderParams; log: boolean }[] = [
  { axis: 'iso', log: true },
  { axis: 'shutter', log: true },
  { axis: 'fnum', log: false },
];

const scheduler = new RequestScheduler<SliderParams, DenoiseResponse>(
  {
    send: (params) => {
      if (!state.imageB64) return Promise.reject(new Error('no image loaded'));
      return api.denoise(state.imageB64, state.toRequestParams(params));
    },
    render: (params, response) => {
      state.applyResponse(params, response);
      renderResult();
    },
    onError: (err) => showError(err),
  },
  150,
);

function showError(err: unknown): void {
  const msg =
    err instanceof ServiceError ? `service error: ${err.message}` : `request failed: ${String(err)}`;
  errorBanner.textContent = msg;
  errorBanner.hidden = false;
  pendingChip.hidden = true;
}

function clearError(): void {
  errorBanner.hidden = true;
}

function renderSliders(): void {
  for (const { axis, log } of sliderDefs) {
    const slider = $<HTMLInputElement>(`slider-${axis}`);
    const label = $<HTMLSpanElement>(`label-${axis}`);
    slider.value = String(valueToSlider(state.params[axis], PARAM_RANGES[axis], log));
    label.textContent = formatValue(axis, state.params[axis]);
  }
}

function renderMetrics(): void {
  const r = state.lastResponse;
  if (!r) {
    metricsBox.textContent = '';
    return;
  }
  // metric values are printed verbatim; the UI must not reinterpret them
  metricsBox.innerHTML = '';
  const entries: [string, string][] = [
    ['TV in', String(r.metrics.tv_in)],
    ['TV out', String(r.metrics.tv_out)],
    ['residual energy', String(r.metrics.residual_energy)],
    ['time', `${r.timing_ms.toFixed(1)} ms`],
  ];
  for (const [k, v] of entries) {
    const row = document.createElement('div');
    row.className = 'metric-row';
    const kEl = document.createElement('span');
    kEl.textContent = k;
    const vEl = document.createElement('code');
    vEl.textContent = v;
    row.append(kEl, vEl);
    metricsBox.append(row);
  }
}

function renderCompareMode(): void {
  const mode = state.compareMode;
  $('pane-side').hidden = mode !== 'side-by-side';
  $('pane-wipe').hidden = mode !== 'wipe';
  $('pane-residual').hidden = mode !== 'residual';
  if (mode === 'wipe') renderWipe();
  if (mode === 'residual') void renderResidual();
}

function renderWipe(): void {
  const top = $<HTMLImageElement>('wipe-output');
  const pct = Number(wipeInput.value);
  top.style.clipPath = `inset(0 ${100 - pct}% 0 0)`;
}

async function loadPixels(b64: string): Promise<ImageData> {
  const img = new Image();
  img.src = `data:image/png;base64,${b64}`;
  await img.decode();
  const canvas = document.createElement('canvas');
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('no 2d context');
  ctx.drawImage(img, 0, 0);
  return ctx.getImageData(0, 0, canvas.width, canvas.height);
}

async function renderResidual(): Promise<void> {
  if (!state.imageB64 || !state.lastResponse) return;
  const [inputPx, outputPx] = await Promise.all([
    loadPixels(state.imageB64),
    loadPixels(state.lastResponse.image),
  ]);
  residualCanvas.width = inputPx.width;
  residualCanvas.height = inputPx.height;
  const ctx = residualCanvas.getContext('2d');
  if (!ctx) return;
  const px = residualPixels(inputPx.data, outputPx.data, state.residualGain);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(px), inputPx.width, inputPx.height), 0, 0);
  $('residual-gain-label').textContent = `|out − in| × ${state.residualGain}`;
}

function renderResult(): void {
  clearError();
  pendingChip.hidden = state.resultIsCurrent();
  const r = state.lastResponse;
  if (r) {
    const src = `data:image/png;base64,${r.image}`;
    outputImg.src = src;
    $<HTMLImageElement>('wipe-output').src = src;
  }
  renderMetrics();
  renderCompareMode();
}

function requestDenoise(): void {
  if (!state.imageB64) return;
  pendingChip.hidden = false;
  scheduler.request({ ...state.params });
}

function onSliderInput(axis: keyof SliderParams, log: boolean): void {
  const slider = $<HTMLInputElement>(`slider-${axis}`);
  const value = sliderToValue(Number(slider.value), PARAM_RANGES[axis], log);
  state.setParam(axis, value);
  $('label-' + axis).textContent = formatValue(axis, state.params[axis]);
  requestDenoise();
}

async function onFileChosen(): Promise<void> {
  const file = fileInput.files?.[0];
  if (!file) return;
  const buf = new Uint8Array(await file.arrayBuffer());
  let binary = '';
  for (const b of buf) binary += String.fromCharCode(b);
  const b64 = btoa(binary);

  let sidecar = {};
  const sideFile = sidecarInput.files?.[0];
  if (sideFile) {
    try {
      sidecar = parseSidecar(await sideFile.text());
    } catch {
      showError(new Error('could not parse the sidecar JSON'));
    }
  }
  state.loadImage(b64, sidecar);
  inputImg.src = `data:image/png;base64,${b64}`;
  $<HTMLImageElement>('wipe-input').src = inputImg.src;
  renderSliders();
  renderMetrics();
  stripBox.innerHTML = '';
  void scheduler.enqueue({ ...state.params });
  pendingChip.hidden = false;
}

/** Built-in sample input: gradient + blocks + per-pixel noise, drawn client-side. */
function drawSample(size = 96): string {
  const canvas = document.createElement('canvas');
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('no 2d context');
  const grad = ctx.createLinearGradient(0, 0, size, size);
  grad.addColorStop(0, '#2a3a55');
  grad.addColorStop(1, '#c8b89a');
  ctx.fillStyle = grad;
  ctx.fillRect(0, 0, size, size);
  ctx.fillStyle = '#7a2f2f';
  ctx.fillRect(size * 0.15, size * 0.2, size * 0.3, size * 0.25);
  ctx.fillStyle = '#2f7a4a';
  ctx.fillRect(size * 0.55, size * 0.5, size * 0.3, size * 0.35);
  const img = ctx.getImageData(0, 0, size, size);
  let s = 1234567;
  const rand = () => {
    // xorshift: deterministic sample noise
    s ^= s << 13;
    s ^= s >>> 17;
    s ^= s << 5;
    return ((s >>> 0) / 4294967296 - 0.5) * 2;
  };
  for (let i = 0; i < img.data.length; i += 4) {
    const n = rand() * 28;
    img.data[i] += n + rand() * 8;
    img.data[i + 1] += n + rand() * 8;
    img.data[i + 2] += n + rand() * 8;
  }
  ctx.putImageData(img, 0, 0);
  return canvas.toDataURL('image/png').split(',')[1];
}

function onLoadSample(): void {
  const b64 = drawSample();
  state.loadImage(b64, { iso: 1600, shutter: 60 });
  inputImg.src = `data:image/png;base64,${b64}`;
  $<HTMLImageElement>('wipe-input').src = inputImg.src;
  renderSliders();
  renderMetrics();
  stripBox.innerHTML = '';
  void scheduler.enqueue({ ...state.params });
  pendingChip.hidden = false;
}

async function onRunSweep(): Promise<void> {
  if (!state.imageB64) return;
  const axis = $<HTMLSelectElement>('sweep-axis').value as SweepAxis;
  const grid = DEFAULT_SWEEP_GRIDS[axis];
  try {
    const resp = await api.sweep(state.imageB64, state.toRequestParams(), axis, grid);
    state.applySweep(axis, resp.steps);
    renderStrip();
  } catch (err) {
    showError(err);
  }
}

function renderStrip(): void {
  stripBox.innerHTML = '';
  for (const step of state.sweepSteps) {
    const cell = document.createElement('figure');
    cell.className = 'strip-cell';
    const img = document.createElement('img');
    img.src = `data:image/png;base64,${step.thumbnail}`;
    img.title = `residual energy ${step.metrics.residual_energy}`;
    const cap = document.createElement('figcaption');
    cap.textContent = formatValue(state.sweepAxis, step.param);
    cell.append(img, cap);
    cell.addEventListener('click', () => {
      state.selectSweepValue(step.param);
      renderSliders();
      requestDenoise();
    });
    stripBox.append(cell);
  }
}

function wireUp(): void {
  for (const { axis, log } of sliderDefs) {
    const slider = $<HTMLInputElement>(`slider-${axis}`);
    slider.max = String(SLIDER_STEPS);
    slider.addEventListener('input', () => onSliderInput(axis, log));
  }
  fileInput.addEventListener('change', () => void onFileChosen());
  sidecarInput.addEventListener('change', () => void onFileChosen());
  $('load-sample').addEventListener('click', onLoadSample);
  $<HTMLSelectElement>('compare-mode').addEventListener('change', (ev) => {
    state.compareMode = (ev.target as HTMLSelectElement).value as typeof state.compareMode;
    renderCompareMode();
  });
  $<HTMLSelectElement>('residual-gain').addEventListener('change', (ev) => {
    state.residualGain = Number((ev.target as HTMLSelectElement).value);
    if (state.compareMode === 'residual') void renderResidual();
  });
  wipeInput.addEventListener('input', renderWipe);
  $('run-sweep').addEventListener('click', () => void onRunSweep());
  renderSliders();
  renderCompareMode();

  void api
    .modelInfo()
    .then((info) => {
      const cfg = info.config as Record<string, unknown>;
      $('model-info').textContent =
        `width ${cfg.width}, ${info.n_params} params, ${((info.macs as number) / 1e9).toFixed(2)} GMACs @256²`;
    })
    .catch(() => {
      $('model-info').textContent = 'service unreachable';
    });
}

wireUp();
