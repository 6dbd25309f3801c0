// End-to-end flow against the contract-accurate fake of a stub-backed
// server with 91 ingested profiles; covers the two release criteria for
// the UI (prompt fidelity, match flow) plus error and refine journeys.

import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { AppFlow, type FlowOutput } from '../src/flow.js';
import { makeFakeServer, type FakeOptions } from './fakeServer.js';
import goldens from './fixtures/goldens.json';

function harness(options: FakeOptions = {}) {
  const { fetchFn, requests } = makeFakeServer(options);
  const frames: string[] = [];
  const previews: string[] = [];
  const output: FlowOutput = {
    renderMain: (html) => frames.push(html),
    renderPreview: (html) => previews.push(html),
  };
  const flow = new AppFlow(new ApiClient('', fetchFn), output);
  return { flow, frames, previews, requests };
}

const flushAsync = () => new Promise((resolve) => setTimeout(resolve, 0));

async function fillSelection(flow: AppFlow, selection: Record<string, string>) {
  for (const [field, value] of Object.entries(selection)) {
    flow.handleFieldChange(field, value);
  }
  await flushAsync();
  await flushAsync();
}

function latest(frames: string[]): string {
  return frames[frames.length - 1];
}

describe('app flow', () => {
  it('boots into the form with served vocabularies', async () => {
    const { flow, frames } = harness();
    await flow.boot();
    expect(flow.phase).toBe('form');
    expect(latest(frames)).toContain('data-field="gender"');
  });

  it('unreachable API shows the offline banner with a retry control', async () => {
    const { flow, frames } = harness({ failVocabularies: true });
    await flow.boot();
    expect(flow.phase).toBe('offline');
    expect(latest(frames)).toContain('offline-banner');
    expect(latest(frames)).toContain('id="retry"');
  });

  it('UI prompt fidelity: the displayed prompt is byte-identical to the API response', async () => {
    for (const [selectionKey, promptKey] of [
      ['female_selection', 'female_prompt'],
      ['male_selection', 'male_prompt'],
    ] as const) {
      const { flow, requests } = harness();
      await flow.boot();
      await fillSelection(flow, goldens[selectionKey] as Record<string, string>);
      expect(flow.displayedPrompt).toBe(goldens[promptKey]);
      const promptCalls = requests.filter((r) => r.path === '/api/v1/prompt');
      expect(promptCalls[promptCalls.length - 1].body).toEqual(goldens[selectionKey]);
    }
  });

  it('no preview is requested while the form is incomplete', async () => {
    const { flow, requests } = harness();
    await flow.boot();
    flow.handleFieldChange('gender', 'Female');
    await Promise.resolve();
    expect(requests.filter((r) => r.path === '/api/v1/prompt')).toHaveLength(0);
    expect(flow.displayedPrompt).toBeNull();
  });

  it('match flow: a complete form renders exactly 5 ranked cards and the generated image', async () => {
    const { flow, frames } = harness({ profileCount: 91 });
    await flow.boot();
    await fillSelection(flow, goldens.female_selection as Record<string, string>);
    await flow.submit();
    expect(flow.phase).toBe('results');
    const html = latest(frames);
    expect(html.split('match-card').length - 1).toBe(5);
    const ranks = [...html.matchAll(/data-rank="(\d+)"/g)].map((m) => Number(m[1]));
    expect(ranks).toEqual([1, 2, 3, 4, 5]);
    expect(html).toContain('id="generated-image"');
    expect(html).toContain(`/api/v1/images/${'cafe'.repeat(16)}`);
    expect(html).toContain('0.310'); // scores shown to 3 decimals
  });

  it('submit is a no-op while incomplete and single-flight while matching', async () => {
    const { flow, requests } = harness();
    await flow.boot();
    await flow.submit(); // incomplete: nothing sent
    expect(requests.filter((r) => r.path === '/api/v1/match')).toHaveLength(0);
    await fillSelection(flow, goldens.female_selection as Record<string, string>);
    const inflight = flow.submit();
    await flow.submit(); // ignored: phase is 'matching'
    await inflight;
    expect(requests.filter((r) => r.path === '/api/v1/match')).toHaveLength(1);
  });

  it('empty store maps to an ingestion instruction with the form preserved', async () => {
    const { flow, frames } = harness({
      matchError: { status: 409, code: 'empty_store', message: 'search on an empty store' },
    });
    await flow.boot();
    await fillSelection(flow, goldens.female_selection as Record<string, string>);
    const before = { ...flow.state.selections };
    await flow.submit();
    expect(flow.phase).toBe('form');
    const html = latest(frames);
    expect(html).toContain('data-code="empty_store"');
    expect(html).toContain('facematch ingest');
    expect(flow.state.selections).toEqual(before);
  });

  it('no-face errors keep the form state and show an actionable panel', async () => {
    const { flow, frames } = harness({
      matchError: { status: 422, code: 'no_face_detected', message: 'no face candidates' },
    });
    await flow.boot();
    await fillSelection(flow, goldens.male_selection as Record<string, string>);
    const before = { ...flow.state.selections };
    await flow.submit();
    expect(latest(frames)).toContain('data-code="no_face_detected"');
    expect(flow.state.selections).toEqual(before);
    expect(latest(frames)).toContain('option value="full" selected');
  });

  it('refine returns to the form with every selection intact', async () => {
    const { flow, frames } = harness();
    await flow.boot();
    await fillSelection(flow, goldens.male_selection as Record<string, string>);
    const before = JSON.stringify(flow.state);
    await flow.submit();
    expect(flow.phase).toBe('results');
    flow.refine();
    expect(flow.phase).toBe('form');
    expect(JSON.stringify(flow.state)).toBe(before);
    const html = latest(frames);
    for (const [field, value] of Object.entries(goldens.male_selection)) {
      expect(html).toContain(`data-field="${field}"`);
      expect(html).toContain(`<option value="${value}" selected>`);
    }
  });
});
