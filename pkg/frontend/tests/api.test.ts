import { describe, expect, it } from 'vitest';

import { ApiClient, ApiRequestError } from '../src/api.js';
import { makeFakeServer } from './fakeServer.js';
import goldens from './fixtures/goldens.json';
import vocabularies from './fixtures/vocabularies.json';

describe('api client', () => {
  it('fetches vocabularies from the documented endpoint', async () => {
    const { fetchFn, requests } = makeFakeServer();
    const api = new ApiClient('', fetchFn);
    const schema = await api.vocabularies();
    expect(schema).toEqual(vocabularies);
    expect(requests[0].path).toBe('/api/v1/vocabularies');
  });

  it('posts the selection map and returns the prompt string', async () => {
    const { fetchFn, requests } = makeFakeServer();
    const api = new ApiClient('', fetchFn);
    const prompt = await api.prompt(goldens.female_selection as Record<string, string>);
    expect(prompt).toBe(goldens.female_prompt);
    expect(requests[0]).toEqual({
      path: '/api/v1/prompt',
      body: goldens.female_selection,
    });
  });

  it('posts parameters plus k for a match', async () => {
    const { fetchFn, requests } = makeFakeServer();
    const api = new ApiClient('', fetchFn);
    const response = await api.match(goldens.male_selection as Record<string, string>, 5);
    expect(response.matches).toHaveLength(5);
    expect(requests[0].body).toEqual({ parameters: goldens.male_selection, k: 5 });
  });

  it('surfaces the machine-readable error code', async () => {
    const { fetchFn } = makeFakeServer({
      matchError: { status: 409, code: 'empty_store', message: 'search on an empty store' },
    });
    const api = new ApiClient('', fetchFn);
    try {
      await api.match(goldens.female_selection as Record<string, string>, 5);
      expect.unreachable('expected a 409');
    } catch (err) {
      expect(err).toBeInstanceOf(ApiRequestError);
      expect((err as ApiRequestError).status).toBe(409);
      expect((err as ApiRequestError).code).toBe('empty_store');
    }
  });

  it('builds image urls from the cache id', () => {
    const api = new ApiClient('');
    expect(api.imageUrl('abc123')).toBe('/api/v1/images/abc123');
  });
});
