// Three-step wizard controller: input -> results -> plan.
// Transitions only move forward (or restart); the results step requires a
// successful estimate, the plan step a successful plan response.

import { ApiClient, ServiceError } from './api.js';
import { Store } from './store.js';
import type { ActivityLevel, DietType, EstimateResponse, NutritionPlan } from './types.js';

export type Step = 'input' | 'results' | 'plan';

export interface EstimateForm {
  ageYears: string;
  gender: '' | 'male' | 'female';
  image: Blob | null;
  imageName: string;
}

export interface PlanForm {
  dietType: DietType;
  weeks: string;
  activityLevel: ActivityLevel;
}

export interface StageError {
  stage: string;
  code: string;
  message: string;
  captureTips: boolean;
}

export interface WizardState {
  step: Step;
  form: EstimateForm;
  fieldErrors: Partial<Record<'ageYears' | 'gender' | 'image', string>>;
  stageError: StageError | null;
  pending: boolean;
  estimate: EstimateResponse | null;
  planForm: PlanForm;
  planFieldErrors: Partial<Record<'weeks', string>>;
  planError: StageError | null;
  plan: NutritionPlan | null;
  weeksAutoFilled: boolean;
}

export function initialState(): WizardState {
  return {
    step: 'input',
    form: { ageYears: '', gender: '', image: null, imageName: '' },
    fieldErrors: {},
    stageError: null,
    pending: false,
    estimate: null,
    planForm: { dietType: 'balanced', weeks: '8', activityLevel: 'sedentary' },
    planFieldErrors: {},
    planError: null,
    plan: null,
    weeksAutoFilled: false,
  };
}

export function validateEstimateForm(form: EstimateForm): WizardState['fieldErrors'] {
  const errors: WizardState['fieldErrors'] = {};
  const age = Number(form.ageYears);
  if (form.ageYears.trim() === '') errors.ageYears = 'age is required';
  else if (!Number.isFinite(age) || age <= 0) errors.ageYears = 'age must be a positive number';
  if (form.gender !== 'male' && form.gender !== 'female') errors.gender = 'choose a gender';
  if (!form.image) errors.image = 'attach a full-body photo';
  return errors;
}

export function validateWeeks(weeks: string): string | null {
  const n = Number(weeks);
  if (weeks.trim() === '' || !Number.isInteger(n) || n < 1) {
    return 'weeks must be a whole number of at least 1';
  }
  return null;
}

function toStageError(err: unknown): StageError {
  if (err instanceof ServiceError) {
    return {
      stage: err.body.stage,
      code: err.body.code,
      message: err.body.message,
      captureTips: err.body.code === 'NoSubjectError' || err.body.stage === 'segmentation',
    };
  }
  const message = err instanceof Error ? err.message : String(err);
  return { stage: 'transport', code: 'NetworkError', message, captureTips: false };
}

export class Wizard {
  readonly store: Store<WizardState>;

  constructor(private readonly api: ApiClient) {
    this.store = new Store(initialState());
  }

  get state(): WizardState {
    return this.store.get();
  }

  updateForm(patch: Partial<EstimateForm>): void {
    this.store.set({
      form: { ...this.state.form, ...patch },
      fieldErrors: {},
      stageError: null,
    });
  }

  updatePlanForm(patch: Partial<PlanForm>): void {
    this.store.set({
      planForm: { ...this.state.planForm, ...patch },
      planFieldErrors: {},
      planError: null,
      weeksAutoFilled: false,
    });
  }

  restart(): void {
    this.store.set(initialState());
  }

  /** Step 1 -> 2. Invalid forms never reach the network. */
  async submitEstimate(): Promise<boolean> {
    if (this.state.step !== 'input' || this.state.pending) return false;
    const errors = validateEstimateForm(this.state.form);
    if (Object.keys(errors).length > 0) {
      this.store.set({ fieldErrors: errors });
      return false;
    }
    this.store.set({ pending: true, stageError: null });
    try {
      const form = this.state.form;
      const estimate = await this.api.estimate({
        image: form.image as Blob,
        imageName: form.imageName || 'photo.png',
        ageYears: Number(form.ageYears),
        gender: form.gender,
      });
      this.store.set({ estimate, step: 'results', pending: false });
      return true;
    } catch (err) {
      const stageError = toStageError(err);
      if (err instanceof ServiceError && err.body.details?.missing) {
        const fieldErrors: WizardState['fieldErrors'] = {};
        for (const field of err.body.details.missing) {
          if (field === 'age_years') fieldErrors.ageYears = 'age is required';
          if (field === 'gender') fieldErrors.gender = 'choose a gender';
          if (field === 'image') fieldErrors.image = 'attach a full-body photo';
        }
        this.store.set({ fieldErrors, pending: false });
      } else {
        this.store.set({ stageError, pending: false });
      }
      return false;
    }
  }

  /** Step 2 -> 3. An infeasible plan pre-fills the server's minimum weeks. */
  async requestPlan(): Promise<boolean> {
    if (this.state.step !== 'results' || this.state.pending) return false;
    const estimate = this.state.estimate;
    if (!estimate) return false;
    const weeksError = validateWeeks(this.state.planForm.weeks);
    if (weeksError) {
      this.store.set({ planFieldErrors: { weeks: weeksError } });
      return false;
    }
    this.store.set({ pending: true, planError: null });
    try {
      const plan = await this.api.requestPlan(estimate.record_id, {
        diet_type: this.state.planForm.dietType,
        weeks: Number(this.state.planForm.weeks),
        activity_level: this.state.planForm.activityLevel,
      });
      this.store.set({ plan, step: 'plan', pending: false });
      return true;
    } catch (err) {
      const stageError = toStageError(err);
      let weeksAutoFilled = false;
      let planForm = this.state.planForm;
      if (err instanceof ServiceError && err.body.code === 'PlanInfeasibleError') {
        const minWeeks = err.body.details?.min_weeks;
        if (typeof minWeeks === 'number' && minWeeks >= 1) {
          planForm = { ...planForm, weeks: String(minWeeks) };
          weeksAutoFilled = true;
        }
      }
      this.store.set({ planError: stageError, planForm, weeksAutoFilled, pending: false });
      return false;
    }
  }
}
