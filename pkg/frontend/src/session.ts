import { ApiClient } from './api.js';
import {
  MalformedPayloadError,
  renderDoneScreen,
  renderErrorScreen,
  renderPairwiseScreen,
  renderRatingScreen,
  Screen,
} from './render.js';
import type { Assignment, Choice, TaskKind } from './types.js';

export interface SessionConfig {
  workerId: string;
  campaignId: string;
  task?: TaskKind;
}

/** Single-page rating flow: fetch one assignment at a time, render it,
 *  submit exactly one POST per assignment, auto-fetch the next. */
export class Session {
  completed = 0;
  current: Assignment | null = null;
  private screen: Screen | null = null;
  private submitting = false;

  constructor(
    private api: ApiClient,
    private config: SessionConfig,
    private mount: HTMLElement,
    private onChange: () => void = () => {},
  ) {}

  handleKey(key: string): void {
    this.screen?.handleKey?.(key);
  }

  private show(screen: Screen): void {
    this.screen = screen;
    this.mount.replaceChildren(screen.element);
    this.onChange();
  }

  async fetchNext(): Promise<void> {
    this.current = null;
    try {
      const assignment = await this.api.nextAssignment(
        this.config.campaignId,
        this.config.workerId,
        this.config.task,
      );
      if (assignment === null) {
        this.show(renderDoneScreen(this.completed));
        return;
      }
      this.renderAssignment(assignment);
    } catch (err) {
      this.show(renderErrorScreen(String(err), () => void this.fetchNext()));
    }
  }

  private renderAssignment(assignment: Assignment): void {
    try {
      const screen =
        assignment.task === 'pairwise'
          ? renderPairwiseScreen(assignment, (choice) => void this.submit({ choice }))
          : renderRatingScreen(assignment, (score) => void this.submit({ score }));
      this.current = assignment; // held only once a screen rendered cleanly
      this.submitting = false;
      this.show(screen);
    } catch (err) {
      if (err instanceof MalformedPayloadError) {
        // no submission possible from the error screen, retry refetches
        this.show(renderErrorScreen(err.message, () => void this.fetchNext()));
        return;
      }
      throw err;
    }
  }

  private async submit(value: { score?: number; choice?: Choice }): Promise<void> {
    if (this.current === null || this.submitting) return; // one POST per assignment
    this.submitting = true;
    const assignmentId = this.current.assignment_id;
    try {
      await this.api.submitRating({ assignment_id: assignmentId, ...value });
      this.completed += 1;
      await this.fetchNext(); // optimistic flow: straight to the next one
    } catch (err) {
      this.submitting = false;
      this.show(
        renderErrorScreen(`Submission failed: ${String(err)}`, () =>
          void this.fetchNext(),
        ),
      );
    }
  }
}
