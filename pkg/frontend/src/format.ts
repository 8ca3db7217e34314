// Display helpers. Percentages come from the server as raw numbers and
// are only ever rounded here, at the last moment.

export function formatPercent(value: number): string {
  return value.toFixed(1);
}

export const LABEL_DISPLAY: Record<string, string> = {
  correct: "Correct (True Positive)",
  incorrect: "Incorrect (False Positive)",
  partially_correct: "Partially Correct (Incomplete)",
};
