// Form state model: pure functions so gating and visibility rules are
// testable without a DOM. The state object survives the refine round-trip
// untouched, which is what keeps user selections stable across views.

import type { FieldSpec, Vocabularies } from './api.js';

export const K_MIN = 1;
export const K_MAX = 20;
export const K_DEFAULT = 5;

export interface FormState {
  selections: Record<string, string>;
  k: number;
}

export function emptyForm(): FormState {
  return { selections: {}, k: K_DEFAULT };
}

export function clampK(value: number): number {
  if (Number.isNaN(value)) return K_DEFAULT;
  return Math.min(K_MAX, Math.max(K_MIN, Math.round(value)));
}

/** Fields shown for the current state; male-only fields need gender = Male. */
export function visibleFields(schema: Vocabularies, state: FormState): FieldSpec[] {
  const male = state.selections['gender'] === 'Male';
  return schema.fields.filter((f) => !f.male_only || male);
}

/**
 * Apply one dropdown change. Setting gender to anything but Male clears the
 * male-only selections so a hidden beard can never ride along in a request.
 */
export function setSelection(
  schema: Vocabularies,
  state: FormState,
  field: string,
  value: string,
): FormState {
  const spec = schema.fields.find((f) => f.name === field);
  if (!spec) return state;
  const selections = { ...state.selections };
  if (value === '') {
    delete selections[field];
  } else if (spec.values.includes(value)) {
    selections[field] = value;
  } else {
    return state;
  }
  if (field === 'gender' && value !== 'Male') {
    for (const f of schema.fields) {
      if (f.male_only) delete selections[f.name];
    }
  }
  return { selections, k: state.k };
}

export function setK(state: FormState, value: number): FormState {
  return { selections: state.selections, k: clampK(value) };
}

/** Submit/preview gate: every required field has a value. */
export function isComplete(schema: Vocabularies, state: FormState): boolean {
  return schema.fields.every(
    (f) => !f.required || state.selections[f.name] !== undefined,
  );
}

/** Request payload: exactly the selections, nothing synthesized. */
export function toParameters(state: FormState): Record<string, string> {
  return { ...state.selections };
}
