// Typed client for the estimation service. The only configuration is the
// service base URL; fetch is injectable for tests.

import type { ApiError, EstimateResponse, NutritionPlan } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiError,
  ) {
    super(body.message);
  }
}

async function parseError(resp: Response): Promise<ServiceError> {
  let body: ApiError;
  try {
    body = (await resp.json()) as ApiError;
  } catch {
    body = { stage: 'transport', code: 'BadResponse', message: `HTTP ${resp.status}` };
  }
  return new ServiceError(resp.status, body);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async health(): Promise<{ status: string }> {
    const resp = await this.fetchImpl(this.url('/api/v1/health'));
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as { status: string };
  }

  async estimate(form: {
    image: Blob;
    imageName: string;
    ageYears: number;
    gender: string;
    deviceId?: string;
  }): Promise<EstimateResponse> {
    const data = new FormData();
    data.append('image', form.image, form.imageName);
    data.append('age_years', String(form.ageYears));
    data.append('gender', form.gender);
    if (form.deviceId) data.append('device_id', form.deviceId);
    const resp = await this.fetchImpl(this.url('/api/v1/estimate'), {
      method: 'POST',
      body: data,
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as EstimateResponse;
  }

  async requestPlan(
    recordId: string,
    req: { diet_type: string; weeks: number; activity_level: string },
  ): Promise<NutritionPlan> {
    const resp = await this.fetchImpl(this.url(`/api/v1/records/${recordId}/plan`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as NutritionPlan;
  }

  async getRecord(recordId: string): Promise<{ response: EstimateResponse; plans: NutritionPlan[] }> {
    const resp = await this.fetchImpl(this.url(`/api/v1/records/${recordId}`));
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as { response: EstimateResponse; plans: NutritionPlan[] };
  }
}
