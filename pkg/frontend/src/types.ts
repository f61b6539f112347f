// API payload shapes for the estimation service (/api/v1).

export interface HealthBlock {
  bmi: number;
  bmr: number;
  active_bmr: number;
  bfp: number;
  ideal_weight_kg: number;
  classification: 'healthy' | 'malnourished';
  obesity_flag: boolean;
}

export interface EstimateResponse {
  record_id: string;
  height_cm: number;
  weight_kg: number;
  health: HealthBlock;
  age_years: number;
  gender: 'male' | 'female';
  device_id: string;
  pipeline_version: string;
  params_digest: string;
  provider_digests: Record<string, string>;
}

export interface NutritionPlan {
  record_id: string;
  diet_type: string;
  weeks: number;
  activity_level: string;
  daily_calorie_target: number;
  weekly_weights_kg: number[];
  macro_split: Record<string, number>;
}

export interface ApiError {
  stage: string;
  code: string;
  message: string;
  details?: { missing?: string[]; min_weeks?: number | null };
}

export const DIET_TYPES = ['balanced', 'low_carb', 'high_protein', 'vegetarian'] as const;
export const ACTIVITY_LEVELS = ['sedentary', 'light', 'moderate', 'very_active'] as const;

export type DietType = (typeof DIET_TYPES)[number];
export type ActivityLevel = (typeof ACTIVITY_LEVELS)[number];
