// Live prompt preview with last-write-wins semantics: every completed form
// change issues a request, but only the newest response may render. The
// displayed string is always byte-identical to the API's answer; the UI
// never assembles prompt text.

import type { Vocabularies } from './api.js';
import { isComplete, toParameters, type FormState } from './state.js';

export type PreviewListener = (prompt: string | null, error: string | null) => void;

export class PromptPreview {
  private ticket = 0;

  constructor(
    private fetchPrompt: (parameters: Record<string, string>) => Promise<string>,
    private listener: PreviewListener,
  ) {}

  /** Called on every form change; stale responses are discarded. */
  async update(schema: Vocabularies, state: FormState): Promise<void> {
    const ticket = ++this.ticket;
    if (!isComplete(schema, state)) {
      this.listener(null, null);
      return;
    }
    try {
      const prompt = await this.fetchPrompt(toParameters(state));
      if (ticket === this.ticket) this.listener(prompt, null);
    } catch (err) {
      if (ticket === this.ticket) {
        this.listener(null, err instanceof Error ? err.message : String(err));
      }
    }
  }
}
