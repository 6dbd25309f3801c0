// Application flow controller: owns the state machine (loading -> form ->
// matching -> results) and produces markup through view renderers. DOM-free
// so the whole user journey is drivable from tests; app.ts binds it to the
// document.

import { ApiClient, ApiRequestError, type MatchResponse, type Vocabularies } from './api.js';
import { PromptPreview } from './preview.js';
import {
  emptyForm,
  isComplete,
  setK,
  setSelection,
  toParameters,
  type FormState,
} from './state.js';
import {
  renderErrorPanel,
  renderForm,
  renderOfflineBanner,
  renderPreview,
  renderResults,
} from './view.js';

export type Phase = 'loading' | 'offline' | 'form' | 'matching' | 'results';

export interface FlowOutput {
  renderMain(html: string): void;
  renderPreview(html: string): void;
}

export class AppFlow {
  schema: Vocabularies | null = null;
  state: FormState = emptyForm();
  phase: Phase = 'loading';
  results: MatchResponse | null = null;
  errorHtml = '';
  displayedPrompt: string | null = null;
  private preview: PromptPreview;

  constructor(
    private api: ApiClient,
    private output: FlowOutput,
  ) {
    this.preview = new PromptPreview(
      (parameters) => this.api.prompt(parameters),
      (prompt, error) => {
        this.displayedPrompt = prompt;
        this.output.renderPreview(renderPreview(prompt, error));
      },
    );
  }

  async boot(): Promise<void> {
    this.phase = 'loading';
    this.render();
    try {
      this.schema = await this.api.vocabularies();
      this.phase = 'form';
    } catch {
      this.phase = 'offline';
    }
    this.render();
  }

  handleFieldChange(field: string, value: string): void {
    if (!this.schema || this.phase !== 'form') return;
    this.state = setSelection(this.schema, this.state, field, value);
    this.render();
    void this.preview.update(this.schema, this.state);
  }

  handleKChange(value: number): void {
    this.state = setK(this.state, value);
  }

  /** One in-flight match at a time; the submit gate enforces completeness. */
  async submit(): Promise<void> {
    if (!this.schema || this.phase !== 'form') return;
    if (!isComplete(this.schema, this.state)) return;
    this.phase = 'matching';
    this.errorHtml = '';
    this.render();
    try {
      this.results = await this.api.match(toParameters(this.state), this.state.k);
      this.phase = 'results';
    } catch (err) {
      // form state is preserved across error panels by construction
      if (err instanceof ApiRequestError) {
        this.errorHtml = renderErrorPanel(err.code, err.message);
      } else {
        this.errorHtml = renderErrorPanel(
          'unreachable',
          err instanceof Error ? err.message : String(err),
        );
      }
      this.phase = 'form';
    }
    this.render();
  }

  /** Back to the form with every selection intact. */
  refine(): void {
    if (this.phase !== 'results') return;
    this.phase = 'form';
    this.render();
    if (this.schema) void this.preview.update(this.schema, this.state);
  }

  mainHtml(): string {
    switch (this.phase) {
      case 'loading':
        return '<p class="loading">loading vocabularies…</p>';
      case 'offline':
        return renderOfflineBanner();
      case 'form':
      case 'matching':
        if (!this.schema) return renderOfflineBanner();
        return (
          this.errorHtml +
          `<form id="parameter-form">` +
          renderForm(this.schema, this.state, this.phase === 'matching') +
          `</form>`
        );
      case 'results':
        if (!this.results) return '';
        return renderResults(this.results, (id) => this.api.imageUrl(id));
    }
  }

  render(): void {
    this.output.renderMain(this.mainHtml());
  }
}
