import { describe, expect, it } from 'vitest';

import type { MatchEntry, Vocabularies } from '../src/api.js';
import { emptyForm, setSelection } from '../src/state.js';
import {
  escapeHtml,
  formatScore,
  renderErrorPanel,
  renderField,
  renderForm,
  renderMatchCard,
  renderPreview,
  renderResults,
} from '../src/view.js';
import vocabularies from './fixtures/vocabularies.json';
import goldens from './fixtures/goldens.json';

const schema = vocabularies as Vocabularies;

function countOccurrences(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

describe('view renderers', () => {
  it('dropdown options come exactly from the served vocabulary', () => {
    const field = schema.fields.find((f) => f.name === 'eye_shape')!;
    const html = renderField(field, undefined);
    for (const value of field.values) {
      expect(html).toContain(`<option value="${value}"`);
    }
    // one placeholder + one option per served value, nothing else
    expect(countOccurrences(html, '<option')).toBe(field.values.length + 1);
  });

  it('marks the current selection', () => {
    const field = schema.fields.find((f) => f.name === 'gender')!;
    const html = renderField(field, 'Female');
    expect(html).toContain('<option value="Female" selected>');
  });

  it('submit stays disabled until the form is complete', () => {
    let state = emptyForm();
    expect(renderForm(schema, state, false)).toContain('disabled');
    for (const [field, value] of Object.entries(goldens.female_selection)) {
      state = setSelection(schema, state, field, value as string);
    }
    const html = renderForm(schema, state, false);
    expect(html).toContain('<button id="submit" type="submit">');
    expect(html).not.toContain('type="submit" disabled');
  });

  it('submit is disabled while a match is pending', () => {
    let state = emptyForm();
    for (const [field, value] of Object.entries(goldens.female_selection)) {
      state = setSelection(schema, state, field, value as string);
    }
    const html = renderForm(schema, state, true);
    expect(html).toContain('disabled');
    expect(html).toContain('matching…');
  });

  it('form omits male-only fields for a Female selection', () => {
    let state = setSelection(schema, emptyForm(), 'gender', 'Female');
    const html = renderForm(schema, state, false);
    expect(html).not.toContain('data-field="beard"');
    state = setSelection(schema, state, 'gender', 'Male');
    expect(renderForm(schema, state, false)).toContain('data-field="beard"');
  });

  it('k selector is bounded 1..20 with the state value', () => {
    const html = renderForm(schema, emptyForm(), false);
    expect(html).toContain('min="1" max="20" value="5"');
  });

  it('preview shows the exact prompt text', () => {
    const prompt = goldens.female_prompt as string;
    const html = renderPreview(prompt, null);
    expect(html).toContain(`data-prompt>${prompt}</p>`);
    expect(renderPreview(null, null)).toBe('');
  });

  it('match cards carry rank, name, and a 3-decimal score', () => {
    const entry: MatchEntry = {
      profile_id: 'p0042',
      name: 'Person 42',
      score: 0.123456,
      rank: 1,
      image_url: 'http://x.test/i.png',
    };
    const html = renderMatchCard(entry, true);
    expect(html).toContain('#1');
    expect(html).toContain('Person 42');
    expect(html).toContain('0.123');
    expect(html).toContain('data-profile="p0042"');
    expect(html).toContain('<img class="thumb"');
  });

  it('non-http image urls render as cards without a broken thumbnail', () => {
    const entry: MatchEntry = {
      profile_id: 'p1',
      name: 'N',
      score: 0.5,
      rank: 2,
      image_url: 'file:///local/path.png',
    };
    expect(renderMatchCard(entry, true)).not.toContain('<img');
  });

  it('results view pairs the generated image with the ranked gallery', () => {
    const response = {
      prompt: goldens.female_prompt as string,
      generated_image_id: 'deadbeef',
      matches: [1, 2, 3, 4, 5].map((rank) => ({
        profile_id: `p${rank}`,
        name: `Person ${rank}`,
        score: 0.5 - rank * 0.05,
        rank,
        image_url: '',
      })),
    };
    const html = renderResults(response, (id) => `/api/v1/images/${id}`);
    expect(countOccurrences(html, 'match-card')).toBe(5);
    expect(html).toContain('src="/api/v1/images/deadbeef"');
    expect(html).toContain('id="refine"');
    const rankOrder = [...html.matchAll(/data-rank="(\d)"/g)].map((m) => m[1]);
    expect(rankOrder).toEqual(['1', '2', '3', '4', '5']);
  });

  it('error panels give actionable guidance', () => {
    const empty = renderErrorPanel('empty_store', 'search on an empty store');
    expect(empty).toContain('facematch ingest');
    const noFace = renderErrorPanel('no_face_detected', 'no face candidates in image');
    expect(noFace).toContain('parameters');
    expect(renderErrorPanel('weird', 'boom')).toContain('boom');
  });

  it('escapes markup in user-visible strings', () => {
    expect(escapeHtml('<b>&"')).toBe('&lt;b&gt;&amp;&quot;');
    expect(formatScore(1)).toBe('1.000');
  });
});
