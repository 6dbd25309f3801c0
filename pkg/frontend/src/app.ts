// Browser entry point: binds the flow controller to the document through
// event delegation. All logic lives in flow.ts / state.ts / view.ts.

import { ApiClient } from './api.js';
import { AppFlow } from './flow.js';

function start(): void {
  const main = document.getElementById('app');
  const preview = document.getElementById('preview');
  const overlay = document.getElementById('overlay');
  if (!main || !preview || !overlay) throw new Error('missing page skeleton');

  const flow = new AppFlow(new ApiClient(''), {
    renderMain: (html) => {
      main.innerHTML = html;
    },
    renderPreview: (html) => {
      preview.innerHTML = html;
    },
  });

  main.addEventListener('change', (event) => {
    const target = event.target as HTMLElement;
    if (target instanceof HTMLSelectElement && target.name) {
      flow.handleFieldChange(target.name, target.value);
    } else if (target instanceof HTMLInputElement && target.name === 'k') {
      flow.handleKChange(Number(target.value));
    }
  });

  main.addEventListener('submit', (event) => {
    event.preventDefault();
    void flow.submit();
  });

  main.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.closest('#retry')) {
      void flow.boot();
      return;
    }
    if (target.closest('#refine')) {
      flow.refine();
      return;
    }
    const card = target.closest<HTMLElement>('.match-card');
    if (card && flow.results) {
      const profileId = card.dataset.profile;
      const entry = flow.results.matches.find((m) => m.profile_id === profileId);
      if (entry) {
        const img = /^https?:\/\//.test(entry.image_url)
          ? `<img src="${entry.image_url}" alt="">`
          : '';
        overlay.innerHTML =
          `<div class="overlay-card">${img}` +
          `<p>#${entry.rank} ${entry.name || entry.profile_id}</p>` +
          `<p>score ${entry.score.toFixed(3)}</p>` +
          `<button id="close-overlay" type="button">close</button></div>`;
        overlay.classList.add('visible');
      }
    }
  });

  overlay.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target === overlay || target.closest('#close-overlay')) {
      overlay.classList.remove('visible');
      overlay.innerHTML = '';
    }
  });

  void flow.boot();
}

document.addEventListener('DOMContentLoaded', start);
