// Pure view-model builders (unit-tested) plus thin DOM renderers.
// Every displayed number is taken verbatim from a service response.

import type { EstimateResponse, NutritionPlan } from './types.js';

export interface MetricRow {
  key: string;
  label: string;
  value: number | string;
  unit: string;
}

export function metricsRows(estimate: EstimateResponse): MetricRow[] {
  const h = estimate.health;
  return [
    { key: 'height_cm', label: 'Height', value: estimate.height_cm, unit: 'cm' },
    { key: 'weight_kg', label: 'Weight', value: estimate.weight_kg, unit: 'kg' },
    { key: 'bmi', label: 'BMI', value: h.bmi, unit: 'kg/m²' },
    { key: 'ideal_weight_kg', label: 'Ideal weight', value: h.ideal_weight_kg, unit: 'kg' },
    { key: 'active_bmr', label: 'Active BMR', value: h.active_bmr, unit: 'kcal/day' },
    { key: 'bfp', label: 'Body fat', value: h.bfp, unit: '%' },
  ];
}

export function classificationBadge(estimate: EstimateResponse): {
  label: string;
  tone: 'ok' | 'warn';
} {
  const c = estimate.health.classification;
  return c === 'malnourished'
    ? { label: 'malnourished', tone: 'warn' }
    : { label: 'healthy', tone: 'ok' };
}

export interface PlanView {
  dailyCalorieTarget: number;
  weeks: number;
  dietType: string;
  activityLevel: string;
  macroRows: { name: string; fraction: number }[];
  trajectory: { week: number; weightKg: number }[];
}

export function planView(plan: NutritionPlan): PlanView {
  return {
    dailyCalorieTarget: plan.daily_calorie_target,
    weeks: plan.weeks,
    dietType: plan.diet_type,
    activityLevel: plan.activity_level,
    macroRows: Object.entries(plan.macro_split).map(([name, fraction]) => ({ name, fraction })),
    trajectory: plan.weekly_weights_kg.map((weightKg, week) => ({ week, weightKg })),
  };
}

/** Printable plan document assembled client-side from the plan payload. */
export function planDocument(estimate: EstimateResponse, plan: NutritionPlan): string {
  const lines = [
    'PERSONALIZED NUTRITION PLAN',
    '===========================',
    `record: ${plan.record_id}`,
    `diet: ${plan.diet_type} | duration: ${plan.weeks} weeks | activity: ${plan.activity_level}`,
    `daily calorie target: ${plan.daily_calorie_target} kcal`,
    '',
    `current weight: ${estimate.weight_kg} kg`,
    `ideal weight:   ${estimate.health.ideal_weight_kg} kg`,
    '',
    'macro split:',
    ...Object.entries(plan.macro_split).map(([k, v]) => `  ${k}: ${Math.round(v * 100)}%`),
    '',
    'weekly weight trajectory:',
    ...plan.weekly_weights_kg.map((w, i) => `  week ${i}: ${w} kg`),
  ];
  return lines.join('\n') + '\n';
}

export const CAPTURE_TIPS = [
  'stand 1.5 m from the camera',
  'place the camera lens 1 m above the ground',
  'keep the lens parallel to your body (90°, perpendicular to the ground)',
  'use even, sufficient lighting and a plain background',
];

// --- DOM helpers -------------------------------------------------------

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === 'class') node.className = v;
    else node.setAttribute(k, v);
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function metricsTable(estimate: EstimateResponse): HTMLTableElement {
  const table = el('table', { class: 'metrics' });
  for (const row of metricsRows(estimate)) {
    table.append(
      el('tr', { 'data-metric': row.key }, [
        el('th', {}, [row.label]),
        el('td', { class: 'value' }, [String(row.value)]),
        el('td', { class: 'unit' }, [row.unit]),
      ]),
    );
  }
  return table;
}

export function trajectoryTable(plan: NutritionPlan): HTMLTableElement {
  const table = el('table', { class: 'trajectory' });
  table.append(el('tr', {}, [el('th', {}, ['week']), el('th', {}, ['weight (kg)'])]));
  for (const row of planView(plan).trajectory) {
    table.append(
      el('tr', { 'data-week': String(row.week) }, [
        el('td', {}, [String(row.week)]),
        el('td', {}, [String(row.weightKg)]),
      ]),
    );
  }
  return table;
}
