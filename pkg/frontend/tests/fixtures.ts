// Stubbed service payloads and a scripted fetch for unit tests.

import type { ApiError, EstimateResponse, NutritionPlan } from '../src/types.js';

export const STUB_ESTIMATE: EstimateResponse = {
  record_id: 'rec-123',
  height_cm: 171.25,
  weight_kg: 67.8912,
  health: {
    bmi: 23.1504,
    bmr: 1622.57,
    active_bmr: 1947.084,
    bfp: 18.7213,
    ideal_weight_kg: 64.5103,
    classification: 'healthy',
    obesity_flag: false,
  },
  age_years: 25,
  gender: 'male',
  device_id: 'default',
  pipeline_version: '0.1.0',
  params_digest: 'abcd',
  provider_digests: { face: 'f', body: 'b', cloud: 'c' },
};

export const STUB_PLAN: NutritionPlan = {
  record_id: 'rec-123',
  diet_type: 'balanced',
  weeks: 3,
  activity_level: 'moderate',
  daily_calorie_target: 1702.5,
  weekly_weights_kg: [67.8912, 66.7642, 65.6373, 64.5103],
  macro_split: { carbs: 0.5, protein: 0.2, fat: 0.3 },
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function errorResponse(body: ApiError, status: number): Response {
  return jsonResponse(body, status);
}

/** fetch stub that pops queued responses and records each call. */
export function scriptedFetch(queue: Response[]) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const next = queue.shift();
    if (!next) throw new Error(`unexpected fetch: ${url}`);
    return next;
  };
  return { impl, calls };
}

export function pngBlob(): Blob {
  return new Blob([new Uint8Array([0x89, 0x50, 0x4e, 0x47])], { type: 'image/png' });
}
