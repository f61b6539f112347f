// Bootstrap: wires the wizard controller to the DOM. Three screens
// mirroring the capture -> metrics -> plan flow.

import { ApiClient } from './api.js';
import { DIET_TYPES, ACTIVITY_LEVELS } from './types.js';
import { Wizard, WizardState } from './wizard.js';
import {
  CAPTURE_TIPS,
  classificationBadge,
  el,
  metricsTable,
  planDocument,
  planView,
  trajectoryTable,
} from './views.js';

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get('service') ?? '';
const wizard = new Wizard(new ApiClient(baseUrl));
const root = document.getElementById('app') as HTMLElement;

function fieldError(message?: string): HTMLElement {
  return message ? el('p', { class: 'field-error' }, [message]) : el('span');
}

function stageErrorBox(error: WizardState['stageError']): HTMLElement {
  if (!error) return el('span');
  const box = el('div', { class: 'stage-error' }, [
    el('strong', {}, [`${error.stage} failed`]),
    el('p', {}, [error.message]),
  ]);
  if (error.captureTips) {
    box.append(
      el('p', {}, ['No subject was found. Retake the photo:']),
      el('ul', {}, CAPTURE_TIPS.map((tip) => el('li', {}, [tip]))),
    );
  }
  return box;
}

function renderInput(state: WizardState): HTMLElement {
  const ageInput = el('input', {
    id: 'age', type: 'number', min: '1', value: state.form.ageYears,
  });
  ageInput.addEventListener('input', () => wizard.updateForm({ ageYears: ageInput.value }));

  const genderSelect = el('select', { id: 'gender' });
  for (const option of ['', 'male', 'female']) {
    genderSelect.append(el('option', { value: option }, [option || 'choose...']));
  }
  genderSelect.value = state.form.gender;
  genderSelect.addEventListener('change', () =>
    wizard.updateForm({ gender: genderSelect.value as '' | 'male' | 'female' }),
  );

  const fileInput = el('input', { id: 'image', type: 'file', accept: 'image/*' });
  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0] ?? null;
    wizard.updateForm({ image: file, imageName: file?.name ?? '' });
  });

  const submit = el('button', { class: 'primary' }, ['Estimate']);
  submit.addEventListener('click', () => void wizard.submitEstimate());
  if (state.pending) submit.setAttribute('disabled', 'disabled');

  return el('section', { class: 'step step-input' }, [
    el('h2', {}, ['1. Subject details']),
    el('label', { for: 'age' }, ['Age (years)']), ageInput,
    fieldError(state.fieldErrors.ageYears),
    el('label', { for: 'gender' }, ['Gender']), genderSelect,
    fieldError(state.fieldErrors.gender),
    el('label', { for: 'image' }, ['Full-body photo']), fileInput,
    state.form.imageName ? el('p', { class: 'file-name' }, [state.form.imageName]) : el('span'),
    fieldError(state.fieldErrors.image),
    el('details', { class: 'capture-tips', open: '' }, [
      el('summary', {}, ['How to capture the photo']),
      el('ul', {}, CAPTURE_TIPS.map((tip) => el('li', {}, [tip]))),
    ]),
    stageErrorBox(state.stageError),
    submit,
  ]);
}

function renderResults(state: WizardState): HTMLElement {
  const estimate = state.estimate;
  if (!estimate) return el('section');
  const badge = classificationBadge(estimate);

  const dietSelect = el('select', { id: 'diet' });
  for (const diet of DIET_TYPES) dietSelect.append(el('option', { value: diet }, [diet]));
  dietSelect.value = state.planForm.dietType;
  dietSelect.addEventListener('change', () =>
    wizard.updatePlanForm({ dietType: dietSelect.value as (typeof DIET_TYPES)[number] }),
  );

  const weeksInput = el('input', {
    id: 'weeks', type: 'number', min: '1', value: state.planForm.weeks,
  });
  weeksInput.addEventListener('input', () => wizard.updatePlanForm({ weeks: weeksInput.value }));

  const activitySelect = el('select', { id: 'activity' });
  for (const level of ACTIVITY_LEVELS) activitySelect.append(el('option', { value: level }, [level]));
  activitySelect.value = state.planForm.activityLevel;
  activitySelect.addEventListener('change', () =>
    wizard.updatePlanForm({ activityLevel: activitySelect.value as (typeof ACTIVITY_LEVELS)[number] }),
  );

  const planButton = el('button', { class: 'primary' }, ['Build nutrition plan']);
  planButton.addEventListener('click', () => void wizard.requestPlan());
  if (state.pending) planButton.setAttribute('disabled', 'disabled');

  const restart = el('button', { class: 'secondary' }, ['Start over']);
  restart.addEventListener('click', () => wizard.restart());

  return el('section', { class: 'step step-results' }, [
    el('h2', {}, ['2. Estimated health metrics']),
    metricsTable(estimate),
    el('p', { class: `badge ${badge.tone}` }, [`screening: ${badge.label}`]),
    el('h3', {}, ['Toward your ideal weight']),
    el('label', { for: 'diet' }, ['Diet type']), dietSelect,
    el('label', { for: 'weeks' }, ['Weeks']), weeksInput,
    state.weeksAutoFilled
      ? el('p', { class: 'hint' }, ['adjusted to the minimum feasible duration'])
      : el('span'),
    fieldError(state.planFieldErrors.weeks),
    el('label', { for: 'activity' }, ['Activity level']), activitySelect,
    stageErrorBox(state.planError),
    planButton,
    restart,
  ]);
}

function renderPlan(state: WizardState): HTMLElement {
  const estimate = state.estimate;
  const plan = state.plan;
  if (!estimate || !plan) return el('section');
  const view = planView(plan);

  const download = el('a', { class: 'primary', download: 'nutrition-plan.txt' }, [
    'Download plan',
  ]);
  download.href =
    'data:text/plain;charset=utf-8,' + encodeURIComponent(planDocument(estimate, plan));

  const restart = el('button', { class: 'secondary' }, ['Start over']);
  restart.addEventListener('click', () => wizard.restart());

  return el('section', { class: 'step step-plan' }, [
    el('h2', {}, ['3. Your nutrition plan']),
    el('p', { class: 'target' }, [
      `${view.dailyCalorieTarget} kcal/day for ${view.weeks} weeks ` +
      `(${view.dietType}, ${view.activityLevel})`,
    ]),
    el('ul', { class: 'macros' }, view.macroRows.map(
      (m) => el('li', {}, [`${m.name}: ${Math.round(m.fraction * 100)}%`]),
    )),
    trajectoryTable(plan),
    download,
    restart,
  ]);
}

function render(state: WizardState): void {
  root.replaceChildren();
  const steps: Record<string, (s: WizardState) => HTMLElement> = {
    input: renderInput,
    results: renderResults,
    plan: renderPlan,
  };
  const nav = el('ol', { class: 'progress' },
    (['input', 'results', 'plan'] as const).map((step, i) =>
      el('li', { class: step === state.step ? 'active' : '' }, [`${i + 1}`]),
    ),
  );
  root.append(nav, steps[state.step](state));
}

wizard.store.subscribe(render);
render(wizard.state);
