import type { Assignment, CampaignSummary, RatingSubmission, TaskKind } from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Thin client over the rating-service endpoints. */
export class ApiClient {
  constructor(private baseUrl: string = '') {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async campaigns(): Promise<CampaignSummary[]> {
    const resp = await fetch(this.url('/api/campaigns'));
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.json();
  }

  /** Returns null when no eligible work remains (HTTP 204). */
  async nextAssignment(
    campaign: string,
    worker: string,
    task?: TaskKind,
  ): Promise<Assignment | null> {
    const params = new URLSearchParams({ campaign, worker });
    if (task) params.set('task', task);
    const resp = await fetch(this.url(`/api/assignment?${params}`));
    if (resp.status === 204) return null;
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.json();
  }

  async submitRating(body: RatingSubmission): Promise<void> {
    const resp = await fetch(this.url('/api/rating'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (resp.status !== 201) throw new ApiError(resp.status, await resp.text());
  }

  async progress(campaign: string): Promise<Record<string, unknown>> {
    const params = new URLSearchParams({ campaign });
    const resp = await fetch(this.url(`/api/progress?${params}`));
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.json();
  }
}
