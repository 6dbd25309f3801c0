// HTML renderers as pure string builders: given state, produce markup.
// Keeping them DOM-free makes the widget structure assertable in tests;
// app.ts owns the actual document.

import type { MatchEntry, MatchResponse, Vocabularies } from './api.js';
import { isComplete, visibleFields, K_MIN, K_MAX, type FormState } from './state.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function formatScore(score: number): string {
  return score.toFixed(3);
}

function labelFor(name: string): string {
  return name.replace(/_/g, ' ');
}

export function renderField(
  field: { name: string; values: string[]; required: boolean },
  selected: string | undefined,
): string {
  const options = [
    `<option value=""${selected === undefined ? ' selected' : ''}>choose…</option>`,
    ...field.values.map(
      (v) =>
        `<option value="${escapeHtml(v)}"${v === selected ? ' selected' : ''}>${escapeHtml(v)}</option>`,
    ),
  ].join('');
  return (
    `<label class="field" data-field="${escapeHtml(field.name)}">` +
    `<span>${escapeHtml(labelFor(field.name))}${field.required ? '' : ' (optional)'}</span>` +
    `<select name="${escapeHtml(field.name)}">${options}</select>` +
    `</label>`
  );
}

export function renderForm(schema: Vocabularies, state: FormState, pending: boolean): string {
  const fields = visibleFields(schema, state)
    .map((f) => renderField(f, state.selections[f.name]))
    .join('');
  const submitDisabled = pending || !isComplete(schema, state) ? ' disabled' : '';
  return (
    `<div class="fields">${fields}</div>` +
    `<label class="field k-field"><span>matches to retrieve</span>` +
    `<input type="number" name="k" min="${K_MIN}" max="${K_MAX}" value="${state.k}"></label>` +
    `<button id="submit" type="submit"${submitDisabled}>` +
    `${pending ? 'matching…' : 'find matching faces'}</button>`
  );
}

export function renderPreview(prompt: string | null, error: string | null): string {
  if (error) return `<p class="preview-error">${escapeHtml(error)}</p>`;
  if (prompt === null) return '';
  // textContent-equivalent: escaping only, no reformatting of the prompt
  return `<p class="prompt-text" data-prompt>${escapeHtml(prompt)}</p>`;
}

export function renderMatchCard(entry: MatchEntry, thumbnail: boolean): string {
  const img =
    thumbnail && /^https?:\/\//.test(entry.image_url)
      ? `<img class="thumb" src="${escapeHtml(entry.image_url)}" alt="">`
      : '';
  return (
    `<li class="match-card" data-profile="${escapeHtml(entry.profile_id)}" data-rank="${entry.rank}">` +
    img +
    `<span class="rank">#${entry.rank}</span>` +
    `<span class="name">${escapeHtml(entry.name || entry.profile_id)}</span>` +
    `<span class="score">${formatScore(entry.score)}</span>` +
    `</li>`
  );
}

export function renderResults(response: MatchResponse, imageUrl: (id: string) => string): string {
  const cards = response.matches.map((m) => renderMatchCard(m, true)).join('');
  const prompt = response.prompt
    ? `<p class="prompt-text" data-prompt>${escapeHtml(response.prompt)}</p>`
    : '';
  return (
    prompt +
    `<div class="results-split">` +
    `<figure class="generated"><img id="generated-image" src="${escapeHtml(
      imageUrl(response.generated_image_id),
    )}" alt="generated face"><figcaption>generated face</figcaption></figure>` +
    `<ol class="gallery" id="gallery">${cards}</ol>` +
    `</div>` +
    `<button id="refine" type="button">refine parameters</button>`
  );
}

export function renderErrorPanel(code: string, message: string): string {
  let hint = '';
  if (code === 'empty_store') {
    hint = 'The profile store is empty. Run ingestion first, e.g. ' +
      '<code>facematch ingest --manifest corpus.jsonl --store store</code>.';
  } else if (code === 'no_face_detected') {
    hint = 'No face was detected in the generated image. Adjust the ' +
      'parameters (try a different face shape or skin tone) and submit again.';
  } else if (code === 'backend_unavailable') {
    hint = 'The image generation backend is unreachable. Retry in a moment ' +
      'or switch the server to the stub backend.';
  }
  return (
    `<div class="error-panel" data-code="${escapeHtml(code)}">` +
    `<strong>${escapeHtml(message)}</strong>` +
    (hint ? `<p>${hint}</p>` : '') +
    `</div>`
  );
}

export function renderOfflineBanner(): string {
  return (
    `<div class="offline-banner">` +
    `<span>API unreachable — the form is disabled.</span>` +
    `<button id="retry" type="button">retry</button>` +
    `</div>`
  );
}
