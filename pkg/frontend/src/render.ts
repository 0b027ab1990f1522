import { swapSides } from './shuffle.js';
import type { Assignment, Choice, ContextTurn } from './types.js';

export interface Screen {
  element: HTMLElement;
  /** Keyboard-first entry: digits pick a score or side, Enter submits. */
  handleKey?: (key: string) => void;
}

export class MalformedPayloadError extends Error {}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function conversation(turns: ContextTurn[]): HTMLElement {
  const box = el('div', 'conversation');
  for (const turn of turns) {
    const row = el('div', `turn turn-${turn.speaker === 'U' ? 'user' : 'system'}`);
    row.appendChild(el('span', 'speaker', turn.speaker === 'U' ? 'User' : 'System'));
    row.appendChild(el('span', 'text', turn.text));
    box.appendChild(row);
  }
  return box;
}

export function validateAssignment(a: Assignment): void {
  const p = a.payload;
  if (!a.assignment_id || !p || !Array.isArray(p.context) || p.context.length === 0) {
    throw new MalformedPayloadError('assignment payload is missing the conversation');
  }
  if (a.task === 'pairwise') {
    if (!p.response_a?.text || !p.response_b?.text) {
      throw new MalformedPayloadError('pairwise payload needs two responses');
    }
  } else {
    if (typeof p.response !== 'string' || p.response.length === 0) {
      throw new MalformedPayloadError('rating payload has no response');
    }
    if (a.task === 'accuracy' && (!p.knowledge || !p.knowledge.body)) {
      throw new MalformedPayloadError('accuracy payload has no reference knowledge');
    }
  }
}

/** 1-5 rating screen. Accuracy shows the reference snippet; the
 *  appropriateness variant renders from context and response only, so
 *  no snippet text can reach the DOM. */
export function renderRatingScreen(
  assignment: Assignment,
  onSubmit: (score: number) => void,
): Screen {
  validateAssignment(assignment);
  const root = el('div', `screen screen-${assignment.task}`);
  root.appendChild(el('h2', 'task-title',
    assignment.task === 'accuracy'
      ? 'Score the accuracy of the response against the reference knowledge'
      : 'Score how naturally the response continues the conversation'));
  root.appendChild(conversation(assignment.payload.context));

  const responseBox = el('div', 'response-box');
  responseBox.appendChild(el('h3', undefined, 'System response'));
  responseBox.appendChild(el('p', 'response-text', assignment.payload.response));
  root.appendChild(responseBox);

  if (assignment.task === 'accuracy') {
    const k = assignment.payload.knowledge!;
    const panel = el('div', 'knowledge-panel');
    panel.appendChild(el('h3', undefined, 'Reference knowledge'));
    panel.appendChild(el('p', 'knowledge-title', k.title));
    panel.appendChild(el('p', 'knowledge-body', k.body));
    root.appendChild(panel);
  }

  // controls go last: nothing is clickable until the payload is on screen
  let selected = 0;
  const scale = el('div', 'scale');
  const buttons: HTMLButtonElement[] = [];
  const submit = el('button', 'submit', 'Submit rating');
  submit.disabled = true;
  const pick = (score: number) => {
    selected = score;
    buttons.forEach((b, i) => b.classList.toggle('selected', i + 1 === score));
    submit.disabled = false;
  };
  for (let score = 1; score <= 5; score++) {
    const b = el('button', 'score-button', String(score));
    b.addEventListener('click', () => pick(score));
    buttons.push(b);
    scale.appendChild(b);
  }
  submit.addEventListener('click', () => {
    if (selected >= 1) onSubmit(selected);
  });
  root.appendChild(scale);
  root.appendChild(submit);

  return {
    element: root,
    handleKey: (key) => {
      if (key >= '1' && key <= '5') pick(Number(key));
      else if (key === 'Enter' && selected >= 1) onSubmit(selected);
    },
  };
}

/** Side-by-side A/B screen with per-assignment randomized left/right
 *  order. Cards carry the backend choice label, so the submitted choice
 *  maps to the right submission no matter which side it rendered on. */
export function renderPairwiseScreen(
  assignment: Assignment,
  onSubmit: (choice: Choice) => void,
): Screen {
  validateAssignment(assignment);
  const root = el('div', 'screen screen-pairwise');
  root.appendChild(el('h2', 'task-title',
    'Select the more appropriate or accurate response'));
  root.appendChild(conversation(assignment.payload.context));

  const cards: { choice: Choice; text: string }[] = [
    { choice: 'A', text: assignment.payload.response_a!.text },
    { choice: 'B', text: assignment.payload.response_b!.text },
  ];
  if (swapSides(assignment.assignment_id)) cards.reverse();

  let selected: Choice | null = null;
  const pair = el('div', 'pair');
  const submit = el('button', 'submit', 'Submit choice');
  submit.disabled = true;
  const cardNodes: HTMLElement[] = [];
  const pick = (choice: Choice) => {
    selected = choice;
    cardNodes.forEach((c) => c.classList.toggle('selected', c.dataset.choice === choice));
    submit.disabled = false;
  };
  cards.forEach((card, side) => {
    const node = el('div', 'response-card');
    node.dataset.choice = card.choice; // backend label, not the visual side
    node.appendChild(el('h3', undefined, `Response ${side === 0 ? '1' : '2'}`));
    node.appendChild(el('p', 'response-text', card.text));
    node.addEventListener('click', () => pick(card.choice));
    cardNodes.push(node);
    pair.appendChild(node);
  });
  submit.addEventListener('click', () => {
    if (selected) onSubmit(selected);
  });
  root.appendChild(pair);
  root.appendChild(submit);

  return {
    element: root,
    handleKey: (key) => {
      if (key === '1' || key === '2') pick(cards[Number(key) - 1].choice);
      else if (key === 'Enter' && selected) onSubmit(selected);
    },
  };
}

export function renderErrorScreen(message: string, onRetry: () => void): Screen {
  const root = el('div', 'screen screen-error');
  root.appendChild(el('h2', 'task-title', 'Something went wrong'));
  root.appendChild(el('p', 'error-message', message));
  const retry = el('button', 'retry', 'Retry');
  retry.addEventListener('click', onRetry);
  root.appendChild(retry);
  return { element: root };
}

export function renderDoneScreen(completed: number): Screen {
  const root = el('div', 'screen screen-done');
  root.appendChild(el('h2', 'task-title', 'No work available'));
  root.appendChild(el('p', undefined,
    `You completed ${completed} assignment${completed === 1 ? '' : 's'}. ` +
    'Check back later for more.'));
  return { element: root };
}
