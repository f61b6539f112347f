"""Derived health metrics and nutrition planning.

BMI, Mifflin-St Jeor BMR with gender intercepts (+5 male, -161 female),
BFP as a linear function of BMI and age (constants 16.2 male, 5.4
female), an activity-scaled BMR, ideal weight at mid-normal BMI, a binary
malnutrition screen at the WHO undernutrition cutoff, and calorie-target
planning toward the ideal weight.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ParameterError, PlanInfeasibleError

MALNUTRITION_BMI_CUTOFF = 18.5
OBESITY_BMI_CUTOFF = 30.0
IDEAL_BMI = 22.0
KCAL_PER_KG = 7700.0
MIN_DAILY_KCAL = 1200.0

BMR_INTERCEPT = {"male": 5.0, "female": -161.0}
BFP_CONSTANT = {"male": 16.2, "female": 5.4}

ACTIVITY_FACTORS = {
    "sedentary": 1.2,
    "light": 1.375,
    "moderate": 1.55,
    "very_active": 1.725,
}

DIET_MACROS = {
    "balanced": {"carbs": 0.50, "protein": 0.20, "fat": 0.30},
    "low_carb": {"carbs": 0.25, "protein": 0.35, "fat": 0.40},
    "high_protein": {"carbs": 0.40, "protein": 0.35, "fat": 0.25},
    "vegetarian": {"carbs": 0.55, "protein": 0.20, "fat": 0.25},
}


def _require_positive(**values):
    for name, v in values.items():
        if not math.isfinite(v) or v <= 0:
            raise ParameterError(f"{name} must be positive, got {v}")


def _require_gender(gender: str):
    if gender not in BMR_INTERCEPT:
        raise ParameterError(f"gender must be one of {sorted(BMR_INTERCEPT)}, got {gender!r}")


def bmi(weight_kg: float, height_cm: float) -> float:
    _require_positive(weight_kg=weight_kg, height_cm=height_cm)
    h_m = height_cm / 100.0
    return weight_kg / (h_m * h_m)


def bmi_imperial(weight_lb: float, height_in: float) -> float:
    _require_positive(weight_lb=weight_lb, height_in=height_in)
    return weight_lb * 703.0 / (height_in * height_in)


def bmr(weight_kg: float, height_cm: float, age_years: float, gender: str) -> float:
    """Mifflin-St Jeor: 10w + 6.25h - 5a + intercept."""
    _require_positive(weight_kg=weight_kg, height_cm=height_cm, age_years=age_years)
    _require_gender(gender)
    return 10.0 * weight_kg + 6.25 * height_cm - 5.0 * age_years + BMR_INTERCEPT[gender]


def bfp(bmi_value: float, age_years: float, gender: str) -> float:
    """Adult body-fat percent: 1.2*BMI + 0.23*age - gender constant."""
    _require_positive(bmi=bmi_value, age_years=age_years)
    _require_gender(gender)
    return 1.2 * bmi_value + 0.23 * age_years - BFP_CONSTANT[gender]


def active_bmr(bmr_value: float, activity_level: str = "sedentary") -> float:
    if activity_level not in ACTIVITY_FACTORS:
        raise ParameterError(
            f"activity_level must be one of {sorted(ACTIVITY_FACTORS)}, got {activity_level!r}")
    _require_positive(bmr=bmr_value)
    return bmr_value * ACTIVITY_FACTORS[activity_level]


def ideal_weight_kg(height_cm: float) -> float:
    _require_positive(height_cm=height_cm)
    h_m = height_cm / 100.0
    return IDEAL_BMI * h_m * h_m


def classify_malnutrition(bmi_value: float) -> str:
    """'malnourished' below the 18.5 cutoff; the boundary itself is healthy."""
    _require_positive(bmi=bmi_value)
    return "malnourished" if bmi_value < MALNUTRITION_BMI_CUTOFF else "healthy"


@dataclass(frozen=True)
class HealthReport:
    bmi: float
    bmr: float
    active_bmr: float
    bfp: float
    ideal_weight_kg: float
    classification: str
    obesity_flag: bool = False

    def to_dict(self) -> dict:
        return {
            "bmi": self.bmi,
            "bmr": self.bmr,
            "active_bmr": self.active_bmr,
            "bfp": self.bfp,
            "ideal_weight_kg": self.ideal_weight_kg,
            "classification": self.classification,
            "obesity_flag": self.obesity_flag,
        }


def build_health_report(weight_kg: float, height_cm: float, age_years: float,
                        gender: str, activity_level: str = "sedentary") -> HealthReport:
    b = bmi(weight_kg, height_cm)
    base = bmr(weight_kg, height_cm, age_years, gender)
    return HealthReport(
        bmi=b,
        bmr=base,
        active_bmr=active_bmr(base, activity_level),
        bfp=bfp(b, age_years, gender),
        ideal_weight_kg=ideal_weight_kg(height_cm),
        classification=classify_malnutrition(b),
        obesity_flag=b >= OBESITY_BMI_CUTOFF,
    )


@dataclass(frozen=True)
class NutritionPlan:
    diet_type: str
    weeks: int
    daily_calorie_target: float
    weekly_weights_kg: list = field(default_factory=list)
    macro_split: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "diet_type": self.diet_type,
            "weeks": self.weeks,
            "daily_calorie_target": self.daily_calorie_target,
            "weekly_weights_kg": list(self.weekly_weights_kg),
            "macro_split": dict(self.macro_split),
        }

    def to_text(self) -> str:
        lines = [
            f"Nutrition plan ({self.diet_type}, {self.weeks} weeks)",
            f"Daily calorie target: {self.daily_calorie_target:.0f} kcal",
            "Macros: " + ", ".join(f"{k} {v:.0%}" for k, v in self.macro_split.items()),
            "Weekly weight trajectory (kg):",
        ]
        lines += [f"  week {i}: {w:.2f}" for i, w in enumerate(self.weekly_weights_kg)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def nutrition_plan(report: HealthReport, current_weight_kg: float, diet_type: str,
                   weeks: int, activity_level: str = "sedentary") -> NutritionPlan:
    """Calorie target moving linearly from current to ideal weight.

    daily target = active BMR + (ideal - current) * 7700 kcal / (weeks * 7 days),
    floored at 1200 kcal/day for safety; an infeasible request reports the
    minimum feasible number of weeks.
    """
    if not isinstance(weeks, int) or weeks < 1:
        raise ParameterError(f"weeks must be a positive integer, got {weeks!r}")
    if diet_type not in DIET_MACROS:
        raise ParameterError(f"diet_type must be one of {sorted(DIET_MACROS)}, got {diet_type!r}")
    _require_positive(current_weight_kg=current_weight_kg)
    base = active_bmr(report.bmr, activity_level)
    delta_kg = report.ideal_weight_kg - current_weight_kg
    daily = base + delta_kg * KCAL_PER_KG / (weeks * 7.0)
    if daily < MIN_DAILY_KCAL:
        deficit_capacity = base - MIN_DAILY_KCAL
        if deficit_capacity <= 0:
            raise PlanInfeasibleError(
                "daily energy budget is below the 1200 kcal/day floor at any duration",
                min_weeks=None)
        min_weeks = math.ceil(-delta_kg * KCAL_PER_KG / (deficit_capacity * 7.0))
        raise PlanInfeasibleError(
            f"plan needs {daily:.0f} kcal/day, below the 1200 kcal/day floor; "
            f"use at least {min_weeks} weeks", min_weeks=int(min_weeks))
    steps = [current_weight_kg + delta_kg * i / weeks for i in range(weeks + 1)]
    steps[-1] = report.ideal_weight_kg
    return NutritionPlan(diet_type, weeks, daily, steps, DIET_MACROS[diet_type])
