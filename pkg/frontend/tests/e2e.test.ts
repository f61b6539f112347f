// End-to-end: the full wizard against a live service instance with the
// committed fixture data and synthetic providers.

import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, resolve } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { metricsRows, planDocument } from '../src/views.js';
import { Wizard } from '../src/wizard.js';

const REPO_ROOT = resolve(__dirname, '..', '..');
const FIXTURES = join(REPO_ROOT, 'fixtures');
const PORT = 8900 + (process.pid % 100);
const BASE_URL = `http://127.0.0.1:${PORT}`;

// 24x24 all-black PNG: a photo with no subject in it.
const BLANK_PNG = Buffer.from(
  'iVBORw0KGgoAAAANSUhEUgAAABgAAAAYCAIAAABvFaqvAAAAFklEQVR4nGNgGAWjYBSMglEwCoYPAAAG2AABH8oAuQAAAABJRU5ErkJggg==',
  'base64',
);

let server: ChildProcess;

async function waitForHealth(client: ApiClient, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const health = await client.health();
      if (health.status === 'ok') return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`service did not come up on ${BASE_URL}: ${lastError}`);
}

function fixtureBlob(name: string): Blob {
  return new Blob([readFileSync(join(FIXTURES, name))], { type: 'image/png' });
}

beforeAll(async () => {
  const tmp = mkdtempSync(join(tmpdir(), 'webui-e2e-'));
  const config = {
    params_path: join(FIXTURES, 'params.bin'),
    calibration_path: join(FIXTURES, 'calibration.json'),
    store_dir: join(tmp, 'store'),
  };
  const configPath = join(tmp, 'config.json');
  writeFileSync(configPath, JSON.stringify(config));
  server = spawn(
    'python3',
    ['-m', 'anthroscan.cli', 'serve', '--config', configPath,
     '--port', String(PORT), '--out-dir', join(tmp, 'out')],
    { cwd: REPO_ROOT, stdio: 'ignore' },
  );
  await waitForHealth(new ApiClient(BASE_URL));
}, 45000);

afterAll(() => {
  server?.kill('SIGTERM');
});

describe('wizard against the live service', () => {
  it('completes all three steps and displays the service numbers verbatim', async () => {
    const api = new ApiClient(BASE_URL);
    const wizard = new Wizard(api);

    wizard.updateForm({
      ageYears: '36',
      gender: 'male',
      image: fixtureBlob('person_04.png'),
      imageName: 'person_04.png',
    });
    expect(await wizard.submitEstimate()).toBe(true);
    expect(wizard.state.step).toBe('results');

    const estimate = wizard.state.estimate!;
    // snapshot equality: what the results view renders is exactly the
    // service response, cross-checked against the stored record
    const stored = await api.getRecord(estimate.record_id);
    expect(estimate).toEqual(stored.response);
    const rows = Object.fromEntries(metricsRows(estimate).map((r) => [r.key, r.value]));
    expect(rows).toEqual({
      height_cm: stored.response.height_cm,
      weight_kg: stored.response.weight_kg,
      bmi: stored.response.health.bmi,
      ideal_weight_kg: stored.response.health.ideal_weight_kg,
      active_bmr: stored.response.health.active_bmr,
      bfp: stored.response.health.bfp,
    });

    // an impatient plan is infeasible; the server minimum is auto-filled
    wizard.updatePlanForm({ weeks: '1', dietType: 'balanced', activityLevel: 'sedentary' });
    expect(await wizard.requestPlan()).toBe(false);
    expect(wizard.state.planError?.code).toBe('PlanInfeasibleError');
    expect(wizard.state.weeksAutoFilled).toBe(true);
    const suggested = Number(wizard.state.planForm.weeks);
    expect(suggested).toBeGreaterThan(1);

    // retrying at the suggested duration completes the wizard
    expect(await wizard.requestPlan()).toBe(true);
    expect(wizard.state.step).toBe('plan');
    const plan = wizard.state.plan!;
    expect(plan.weeks).toBe(suggested);
    expect(plan.weekly_weights_kg).toHaveLength(suggested + 1);
    expect(plan.weekly_weights_kg[0]).toBeCloseTo(estimate.weight_kg, 5);
    expect(plan.weekly_weights_kg[suggested]).toBeCloseTo(
      estimate.health.ideal_weight_kg, 5);
    expect(plan.daily_calorie_target).toBeGreaterThanOrEqual(1200);

    // the downloadable document carries the same numbers
    const doc = planDocument(estimate, plan);
    expect(doc).toContain(`daily calorie target: ${plan.daily_calorie_target} kcal`);
    expect(doc).toContain(`current weight: ${estimate.weight_kg} kg`);

    // only the successful plan is persisted on the record
    const after = await api.getRecord(estimate.record_id);
    expect(after.plans).toHaveLength(1);
    expect(after.plans[0].weeks).toBe(suggested);
  }, 30000);

  it('surfaces a no-subject failure with the stage name and capture tips', async () => {
    const wizard = new Wizard(new ApiClient(BASE_URL));
    wizard.updateForm({
      ageYears: '30',
      gender: 'female',
      image: new Blob([BLANK_PNG], { type: 'image/png' }),
      imageName: 'blank.png',
    });
    expect(await wizard.submitEstimate()).toBe(false);
    expect(wizard.state.step).toBe('input');
    expect(wizard.state.stageError?.stage).toBe('segmentation');
    expect(wizard.state.stageError?.captureTips).toBe(true);
  }, 15000);

  it('keeps deterministic service responses across identical submissions', async () => {
    const api = new ApiClient(BASE_URL);
    const submit = async () => {
      const wizard = new Wizard(api);
      wizard.updateForm({
        ageYears: '25', gender: 'male',
        image: fixtureBlob('person_00.png'), imageName: 'person_00.png',
      });
      await wizard.submitEstimate();
      return wizard.state.estimate!;
    };
    const a = await submit();
    const b = await submit();
    expect(a).toEqual(b);
    const golden = JSON.parse(readFileSync(join(FIXTURES, 'golden_response.json'), 'utf-8'));
    expect(a).toEqual(golden);
  }, 20000);
});
