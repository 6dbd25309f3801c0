// Typed client over the facematch HTTP API. The UI never builds prompt
// text or option lists itself; everything comes from these endpoints.

export interface FieldSpec {
  name: string;
  values: string[];
  required: boolean;
  male_only: boolean;
}

export interface Vocabularies {
  fields: FieldSpec[];
}

export interface MatchEntry {
  profile_id: string;
  name: string;
  score: number;
  rank: number;
  image_url: string;
}

export interface MatchResponse {
  prompt: string | null;
  generated_image_id: string;
  matches: MatchEntry[];
}

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiRequestError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(resp: Response): Promise<ApiRequestError> {
  let code = 'unknown_error';
  let message = `request failed with status ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the generic message
  }
  return new ApiRequestError(resp.status, code, message);
}

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  vocabularies(): Promise<Vocabularies> {
    return this.getJson<Vocabularies>('/api/v1/vocabularies');
  }

  async prompt(parameters: Record<string, string>): Promise<string> {
    const doc = await this.postJson<{ prompt: string }>('/api/v1/prompt', parameters);
    return doc.prompt;
  }

  match(parameters: Record<string, string>, k: number): Promise<MatchResponse> {
    return this.postJson<MatchResponse>('/api/v1/match', { parameters, k });
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/v1/images/${imageId}`;
  }

  healthz(): Promise<{ status: string; profile_count: number }> {
    return this.getJson('/healthz');
  }
}
