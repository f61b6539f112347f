#!/usr/bin/env python3
"""Derived health metrics and a personalized nutrition plan."""

from anthroscan.errors import PlanInfeasibleError
from anthroscan.health import build_health_report, nutrition_plan


def main():
    subjects = [
        ("healthy adult", 70.0, 175.0, 25, "male", "moderate"),
        ("underweight", 45.0, 170.0, 31, "female", "light"),
        ("overweight", 98.0, 178.0, 44, "male", "sedentary"),
    ]
    for label, weight, height, age, gender, activity in subjects:
        r = build_health_report(weight, height, age, gender, activity)
        print(f"{label}: BMI {r.bmi:.2f} | BMR {r.bmr:.0f} kcal | "
              f"active {r.active_bmr:.0f} kcal | BFP {r.bfp:.1f}% | "
              f"ideal {r.ideal_weight_kg:.1f} kg | {r.classification}"
              + (" (obesity advisory)" if r.obesity_flag else ""))

    print("\n--- an impatient request reports the minimum safe duration ---")
    report = build_health_report(98.0, 178.0, 44, "male", "sedentary")
    try:
        nutrition_plan(report, 98.0, "low_carb", weeks=12)
    except PlanInfeasibleError as err:
        print(f"rejected: {err}")
        plan = nutrition_plan(report, 98.0, "low_carb", weeks=err.min_weeks)
        print(f"\n--- retried at the suggested {err.min_weeks} weeks ---")
        print(plan.to_text())


if __name__ == "__main__":
    main()
