import { describe, expect, it } from 'vitest';

import { ApiClient, ServiceError } from '../src/api.js';
import { errorResponse, jsonResponse, pngBlob, scriptedFetch, STUB_ESTIMATE } from './fixtures.js';

describe('ApiClient', () => {
  it('posts multipart form data with the expected fields', async () => {
    const { impl, calls } = scriptedFetch([jsonResponse(STUB_ESTIMATE)]);
    const client = new ApiClient('http://svc/', impl);
    await client.estimate({
      image: pngBlob(), imageName: 'subject.png', ageYears: 31, gender: 'female',
      deviceId: 'phone-a',
    });
    expect(calls[0].url).toBe('http://svc/api/v1/estimate');
    const body = calls[0].init?.body as FormData;
    expect(body.get('age_years')).toBe('31');
    expect(body.get('gender')).toBe('female');
    expect(body.get('device_id')).toBe('phone-a');
    expect(body.get('image')).toBeInstanceOf(Blob);
  });

  it('raises ServiceError with the parsed error body', async () => {
    const { impl } = scriptedFetch([
      errorResponse({ stage: 'decode', code: 'ParameterError', message: 'cannot decode image' }, 400),
    ]);
    const client = new ApiClient('http://svc', impl);
    const err = await client
      .estimate({ image: pngBlob(), imageName: 'x.png', ageYears: 30, gender: 'male' })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(400);
    expect(err.body.stage).toBe('decode');
  });

  it('survives non-JSON error bodies', async () => {
    const { impl } = scriptedFetch([new Response('boom', { status: 500 })]);
    const client = new ApiClient('http://svc', impl);
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.body.stage).toBe('transport');
  });
});
