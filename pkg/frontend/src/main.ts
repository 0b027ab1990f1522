import { ApiClient } from './api.js';
import { Session } from './session.js';
import type { TaskKind } from './types.js';

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

function requireElement(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

async function start(): Promise<void> {
  const form = requireElement('setup') as HTMLFormElement;
  const mount = requireElement('screen');
  const status = requireElement('status');

  // base URL, worker and campaign come from the form, prefilled from the
  // query string so sessions are linkable
  (form.elements.namedItem('base-url') as HTMLInputElement).value =
    param('base') ?? window.location.origin;
  (form.elements.namedItem('worker') as HTMLInputElement).value = param('worker') ?? '';
  (form.elements.namedItem('campaign') as HTMLInputElement).value =
    param('campaign') ?? '';
  (form.elements.namedItem('task') as HTMLSelectElement).value = param('task') ?? '';

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const baseUrl = (form.elements.namedItem('base-url') as HTMLInputElement).value;
    const worker = (form.elements.namedItem('worker') as HTMLInputElement).value.trim();
    const campaign = (form.elements.namedItem('campaign') as HTMLInputElement).value.trim();
    const task = (form.elements.namedItem('task') as HTMLSelectElement).value;
    if (!worker || !campaign) return;

    const session = new Session(
      new ApiClient(baseUrl),
      { workerId: worker, campaignId: campaign, task: (task || undefined) as TaskKind },
      mount,
      () => {
        status.textContent = `worker ${worker} · campaign ${campaign} · completed ${session.completed}`;
      },
    );
    document.addEventListener('keydown', (e) => session.handleKey(e.key));
    form.classList.add('hidden');
    void session.fetchNext();
  });
}

void start();
