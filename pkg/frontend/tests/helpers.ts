import type { Assignment, TaskKind } from '../src/types.js';

export const SNIPPET_BODY =
  'Free parking is available on site for guests staying overnight.';
export const SNIPPET_TITLE = 'Is parking available at the inn?';

export function makeAssignment(
  task: TaskKind,
  overrides: Partial<Assignment> = {},
): Assignment {
  const base: Assignment = {
    assignment_id: `camp:${task}:d0-t2:sys-a:w1`,
    campaign_id: 'camp',
    task,
    instance_id: 'd0-t2',
    submission_ids: task === 'pairwise' ? ['sys-a', 'sys-b'] : ['sys-a'],
    worker_id: 'w1',
    expires_at: 9999999999,
    payload: {
      instance_id: 'd0-t2',
      context: [
        { speaker: 'U', text: 'i need a hotel with parking' },
        { speaker: 'S', text: 'the inn has rooms available' },
        { speaker: 'U', text: 'can i park at the inn?' },
      ],
    },
  };
  if (task === 'pairwise') {
    base.payload.response_a = { submission_id: 'sys-a', text: 'Yes, parking is free.' };
    base.payload.response_b = { submission_id: 'sys-b', text: 'Parking costs 5 pounds.' };
  } else {
    base.payload.response = 'Yes, you can park there.';
    if (task === 'accuracy') {
      base.payload.knowledge = {
        domain: 'hotel',
        entity_id: '1',
        doc_id: '1',
        entity_name: 'the inn',
        title: SNIPPET_TITLE,
        body: SNIPPET_BODY,
      };
    }
  }
  return { ...base, ...overrides, payload: { ...base.payload, ...overrides.payload } };
}
