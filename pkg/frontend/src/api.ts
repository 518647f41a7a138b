import type { CameraParamsMsg, DenoiseResponse, SweepAxis, SweepResponse } from './types.js';

export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail?: string,
  ) {
    super(`${code} (${status})${detail ? `: ${detail}` : ''}`);
  }
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  const resp = await fetch(`${base}${path}`, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    let code = 'http_error';
    let detail: string | undefined;
    try {
      const payload = (await resp.json()) as { error?: string; detail?: unknown };
      code = payload.error ?? code;
      detail = typeof payload.detail === 'string' ? payload.detail : undefined;
    } catch {
      /* non-JSON error body */
    }
    throw new ServiceError(resp.status, code, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(private base: string = '') {}

  denoise(imageB64: string, params: CameraParamsMsg, returnResidual = false): Promise<DenoiseResponse> {
    return post<DenoiseResponse>(this.base, '/v1/denoise', {
      image: imageB64,
      params,
      return_residual: returnResidual,
    });
  }

  sweep(imageB64: string, params: CameraParamsMsg, axis: SweepAxis, grid: number[]): Promise<SweepResponse> {
    return post<SweepResponse>(this.base, '/v1/sweep', {
      image: imageB64,
      params,
      axis,
      grid,
    });
  }

  async modelInfo(): Promise<Record<string, unknown>> {
    const resp = await fetch(`${this.base}/v1/model`);
    if (!resp.ok) throw new ServiceError(resp.status, 'http_error');
    return (await resp.json()) as Record<string, unknown>;
  }
}
