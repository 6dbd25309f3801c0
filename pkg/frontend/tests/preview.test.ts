import { describe, expect, it } from 'vitest';

import type { Vocabularies } from '../src/api.js';
import { PromptPreview } from '../src/preview.js';
import { emptyForm, setSelection } from '../src/state.js';
import vocabularies from './fixtures/vocabularies.json';
import goldens from './fixtures/goldens.json';

const schema = vocabularies as Vocabularies;

function femaleState() {
  let state = emptyForm();
  for (const [field, value] of Object.entries(goldens.female_selection)) {
    state = setSelection(schema, state, field, value as string);
  }
  return state;
}

describe('prompt preview', () => {
  it('shows nothing for an incomplete form and never calls the API', async () => {
    let calls = 0;
    const shown: Array<string | null> = [];
    const preview = new PromptPreview(
      async () => {
        calls += 1;
        return 'x';
      },
      (prompt) => shown.push(prompt),
    );
    await preview.update(schema, emptyForm());
    expect(calls).toBe(0);
    expect(shown).toEqual([null]);
  });

  it('renders the API response byte for byte', async () => {
    const seen: Array<Record<string, string>> = [];
    const shown: Array<string | null> = [];
    const preview = new PromptPreview(
      async (parameters) => {
        seen.push(parameters);
        return goldens.female_prompt as string;
      },
      (prompt) => shown.push(prompt),
    );
    await preview.update(schema, femaleState());
    expect(seen[0]).toEqual(goldens.female_selection);
    expect(shown[0]).toBe(goldens.female_prompt);
  });

  it('discards stale responses when edits race', async () => {
    const resolvers: Array<(v: string) => void> = [];
    const shown: Array<string | null> = [];
    const preview = new PromptPreview(
      () => new Promise<string>((resolve) => resolvers.push(resolve)),
      (prompt) => shown.push(prompt),
    );
    const first = preview.update(schema, femaleState());
    const second = preview.update(schema, femaleState());
    // second request resolves first; the first (stale) resolves after
    resolvers[1]('newest prompt');
    await second;
    resolvers[0]('stale prompt');
    await first;
    expect(shown).toEqual(['newest prompt']);
  });

  it('reports errors only for the newest request', async () => {
    const outcomes: Array<[string | null, string | null]> = [];
    let fail = true;
    const preview = new PromptPreview(
      async () => {
        if (fail) throw new Error('backend down');
        return 'recovered';
      },
      (prompt, error) => outcomes.push([prompt, error]),
    );
    await preview.update(schema, femaleState());
    fail = false;
    await preview.update(schema, femaleState());
    expect(outcomes).toEqual([
      [null, 'backend down'],
      ['recovered', null],
    ]);
  });
});
