import type { EstimateView } from "./api.js";

/** Physical loads with float noise trimmed: 4 significant digits,
 * integers shown plain ("80 N", "40.02 N"). */
export function formatStimulus(value: number, unit: string): string {
  const rendered = Number.isInteger(value)
    ? String(value)
    : String(Number(value.toPrecision(4)));
  return `${rendered} ${unit}`;
}

/** Expand a compact weight/notch label ("B5/6") to what the operator
 * physically sets ("B5, notch 6"); unknown shapes pass through. */
export function formatLabel(label: string | null): string | null {
  if (label === null) return null;
  const match = /^([A-Z]+\d+)\/(\d+)$/.exec(label);
  if (!match) return label;
  return `${match[1]}, notch ${match[2]}`;
}

/** One-line running estimate with honest unbounded endpoints. */
export function describeEstimate(estimate: EstimateView, unit: string): string {
  const pct = Math.round(estimate.level * 100);
  const point =
    estimate.point === null ? "undefined" : formatStimulus(estimate.point, unit);
  let interval: string;
  if (estimate.lo === null && estimate.hi === null) {
    interval = "all loads";
  } else if (estimate.lo === null) {
    interval = `up to ${formatStimulus(estimate.hi as number, unit)}`;
  } else if (estimate.hi === null) {
    interval = `at least ${formatStimulus(estimate.lo, unit)}`;
  } else {
    interval = `${formatStimulus(estimate.lo, unit)} to ${formatStimulus(estimate.hi, unit)}`;
  }
  return `point ${point}, ${pct}% interval ${interval}`;
}
