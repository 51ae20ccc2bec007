// Client-side mirror of the gateway's threshold rules: invalid values
// never leave the form.

export function validateThresholds(low: number, high: number): string | null {
  if (!Number.isInteger(low) || !Number.isInteger(high)) {
    return 'thresholds must be whole centi-percent values';
  }
  if (low <= 0 || high >= 10000) {
    return 'thresholds must stay between 0 and 100%';
  }
  if (low >= high) {
    return 'pump-on threshold must be below the pump-off threshold';
  }
  return null;
}
