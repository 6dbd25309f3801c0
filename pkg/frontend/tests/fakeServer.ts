// Contract-accurate fake of a stub-backed facematch server with 91 ingested
// profiles. Request/response shapes mirror the recorded fixtures, so the UI
// is tested against exactly what the real API serves.

import vocabularies from './fixtures/vocabularies.json';
import goldens from './fixtures/goldens.json';

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface FakeOptions {
  profileCount?: number;
  failVocabularies?: boolean;
  matchError?: { status: number; code: string; message: string } | null;
}

export interface RecordedRequest {
  path: string;
  body: unknown;
}

function sameSelection(a: Record<string, string>, b: Record<string, string>): boolean {
  const ka = Object.keys(a).sort();
  const kb = Object.keys(b).sort();
  return ka.length === kb.length && ka.every((k, i) => k === kb[i] && a[k] === b[k]);
}

function promptFor(parameters: Record<string, string>): string {
  if (sameSelection(parameters, goldens.female_selection as Record<string, string>)) {
    return goldens.female_prompt as string;
  }
  if (sameSelection(parameters, goldens.male_selection as Record<string, string>)) {
    return goldens.male_prompt as string;
  }
  // any other complete selection: a stable string distinct per selection
  return 'prompt:' + JSON.stringify(parameters);
}

export function makeFakeServer(options: FakeOptions = {}): {
  fetchFn: FetchLike;
  requests: RecordedRequest[];
} {
  const profileCount = options.profileCount ?? 91;
  const requests: RecordedRequest[] = [];

  const json = (status: number, body: unknown): Response =>
    new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    });

  const fetchFn: FetchLike = async (input, init) => {
    const url = new URL(input, 'http://fake.test');
    const path = url.pathname;
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    requests.push({ path, body });

    if (path === '/api/v1/vocabularies') {
      if (options.failVocabularies) return json(500, { error: { code: 'down', message: 'down' } });
      return json(200, vocabularies);
    }
    if (path === '/healthz') {
      return json(200, { status: 'ok', profile_count: profileCount });
    }
    if (path === '/api/v1/prompt') {
      return json(200, { prompt: promptFor(body as Record<string, string>) });
    }
    if (path === '/api/v1/match') {
      if (options.matchError) {
        const { status, code, message } = options.matchError;
        return json(status, { error: { code, message } });
      }
      const k = Math.min((body as { k: number }).k, profileCount);
      const matches = Array.from({ length: k }, (_, i) => ({
        profile_id: `p${String(i + 7).padStart(4, '0')}`,
        name: `Person ${i + 7}`,
        score: 0.31 - i * 0.04,
        rank: i + 1,
        image_url: `http://fake.test/thumbs/${i + 7}.png`,
      }));
      return json(200, {
        prompt: promptFor((body as { parameters: Record<string, string> }).parameters),
        generated_image_id: 'cafe'.repeat(16),
        matches,
      });
    }
    return json(404, { error: { code: 'not_found', message: `no route ${path}` } });
  };

  return { fetchFn, requests };
}
