/**
 * Rater survey session: one image at a time, two mandatory 7-point answers,
 * strictly forward.
 *
 * All progress state lives on the server; this class only mirrors the
 * current item. Reloading the page (or constructing a fresh session) resumes
 * wherever the server cursor is — nothing is persisted client-side.
 */

import { NextItem, WorkbenchApi } from "./api.js";

export const LIKERT_MIN = 1;
export const LIKERT_MAX = 7;

export type Scale = "feasibility" | "novelty";

export interface RaterAnswers {
  feasibility: number | null;
  novelty: number | null;
}

function emptyAnswers(): RaterAnswers {
  return { feasibility: null, novelty: null };
}

export class RaterSession {
  current: NextItem | null = null;
  answers: RaterAnswers = emptyAnswers();
  private shownAt = 0;
  private readonly now: () => number;

  constructor(
    private readonly api: WorkbenchApi,
    readonly raterId: string,
    now?: () => number,
  ) {
    this.now = now ?? (() => Date.now());
  }

  /** Fetch the server cursor; the entry point on load and after reload. */
  async load(): Promise<NextItem> {
    this.current = await this.api.getNext(this.raterId);
    this.answers = emptyAnswers();
    this.shownAt = this.now();
    return this.current;
  }

  get complete(): boolean {
    return this.current?.complete ?? false;
  }

  setAnswer(scale: Scale, value: number): void {
    if (!Number.isInteger(value) || value < LIKERT_MIN || value > LIKERT_MAX) {
      throw new RangeError(
        `${scale} must be an integer in ${LIKERT_MIN}..${LIKERT_MAX}, got ${value}`,
      );
    }
    this.answers[scale] = value;
  }

  /** Submission is allowed only when both scales are answered. */
  canSubmit(): boolean {
    return (
      this.current !== null &&
      !this.current.complete &&
      this.answers.feasibility !== null &&
      this.answers.novelty !== null
    );
  }

  /** Submit both answers with elapsed time, then advance to the next item. */
  async submit(): Promise<NextItem> {
    if (!this.canSubmit() || !this.current?.artifact_id) {
      throw new Error("both answers are required before submitting");
    }
    const elapsed = Math.max(0, Math.round(this.now() - this.shownAt));
    await this.api.submitRating(this.raterId, {
      artifact_id: this.current.artifact_id,
      feasibility: this.answers.feasibility as number,
      novelty: this.answers.novelty as number,
      elapsed_ms: elapsed,
    });
    return this.load();
  }
}
