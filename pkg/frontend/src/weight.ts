/**
 * The CAD-image prompt weight control model.
 *
 * The backend accepts either no CAD prompting at all ("off") or a blending
 * weight inside [0.35, 1]. The five canonical study weights are offered as
 * detents; anything outside the closed range is invalid and must never reach
 * the server.
 */

export const WEIGHT_MIN = 0.35;
export const WEIGHT_MAX = 1.0;

/** Detent values shown on the slider, lowest to highest. */
export const CANONICAL_WEIGHTS: readonly number[] = [0.35, 0.51, 0.67, 0.83, 1.0];

export type WeightSetting = "off" | number;

export function isValidWeight(value: WeightSetting): boolean {
  if (value === "off") return true;
  return (
    typeof value === "number" &&
    Number.isFinite(value) &&
    value >= WEIGHT_MIN &&
    value <= WEIGHT_MAX
  );
}

/**
 * Parse a raw control value ("off" or a decimal string) into a weight
 * setting. Throws RangeError on anything outside {off} ∪ [0.35, 1].
 */
export function parseWeightInput(raw: string): WeightSetting {
  const trimmed = raw.trim().toLowerCase();
  if (trimmed === "off" || trimmed === "") return "off";
  const value = Number(trimmed);
  if (!isValidWeight(value)) {
    throw new RangeError(
      `weight must be "off" or a number in [${WEIGHT_MIN}, ${WEIGHT_MAX}], got ${raw}`,
    );
  }
  return value;
}

/** Label shown for a weight setting, matching the run labels. */
export function weightLabel(value: WeightSetting): string {
  if (value === "off") return "off (enhancer only)";
  // trim trailing zeros: 1.0 -> "1", 0.35 -> "0.35"
  return `CIP(${String(Number(value.toFixed(4)))})`;
}

/** The weight sent over the wire: null means CAD prompting off. */
export function wireWeight(value: WeightSetting): number | null {
  if (!isValidWeight(value)) {
    throw new RangeError(`invalid weight setting: ${String(value)}`);
  }
  return value === "off" ? null : value;
}
