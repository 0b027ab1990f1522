// Wire types for the rating-service HTTP API.

export type TaskKind = 'appropriateness' | 'accuracy' | 'pairwise';

export interface ContextTurn {
  speaker: 'U' | 'S';
  text: string;
}

export interface KnowledgePanel {
  domain: string;
  entity_id: string;
  doc_id: string;
  entity_name: string | null;
  title: string;
  body: string;
}

export interface PairwiseResponse {
  submission_id: string;
  text: string;
}

export interface AssignmentPayload {
  instance_id: string;
  context: ContextTurn[];
  response?: string;
  knowledge?: KnowledgePanel;
  response_a?: PairwiseResponse;
  response_b?: PairwiseResponse;
}

export interface Assignment {
  assignment_id: string;
  campaign_id: string;
  task: TaskKind;
  instance_id: string;
  submission_ids: string[];
  worker_id: string;
  expires_at: number;
  payload: AssignmentPayload;
}

export interface CampaignSummary {
  campaign_id: string;
  tasks: TaskKind[];
  submissions: string[];
  slots_total: number;
  slots_complete: number;
}

/** Backend-side choice labels: 'A' is payload.response_a regardless of
 *  which side the UI happened to render it on. */
export type Choice = 'A' | 'B';

export interface RatingSubmission {
  assignment_id: string;
  score?: number;
  choice?: Choice;
}
