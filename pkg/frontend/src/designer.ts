/**
 * Designer console session: iterative prompt/weight steering.
 *
 * Each generation first retrieves the CAD preview (when a weight is set), so
 * the designer sees what will steer the output, then requests the grid.
 * Every attempt — including failed ones — is appended to the session
 * history, and any history entry can be re-opened.
 */

import { CadPreview, DesignerGrid, WorkbenchApi } from "./api.js";
import { WeightSetting, isValidWeight, wireWeight } from "./weight.js";

export interface GenerationRecord {
  prompt: string;
  weight: WeightSetting;
  preview: CadPreview | null;
  grid: DesignerGrid | null;
  error: string | null;
  startedAt: number;
}

export class DesignerSession {
  private readonly records: GenerationRecord[] = [];
  /** Called when a CAD preview arrives, before generation finishes. */
  onPreview: ((record: GenerationRecord) => void) | null = null;

  constructor(
    private readonly api: WorkbenchApi,
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** Append-only history of every generation attempt, oldest first. */
  get history(): readonly GenerationRecord[] {
    return this.records;
  }

  open(index: number): GenerationRecord {
    const record = this.records[index];
    if (!record) throw new RangeError(`no history entry ${index}`);
    return record;
  }

  async generate(prompt: string, weight: WeightSetting): Promise<GenerationRecord> {
    if (!prompt.trim()) throw new Error("prompt must be nonempty");
    if (!isValidWeight(weight)) {
      throw new RangeError(`weight must be "off" or in [0.35, 1], got ${String(weight)}`);
    }
    const record: GenerationRecord = {
      prompt,
      weight,
      preview: null,
      grid: null,
      error: null,
      startedAt: this.now(),
    };
    this.records.push(record);
    try {
      if (weight !== "off") {
        record.preview = await this.api.designerRetrieve(prompt);
        this.onPreview?.(record);
      }
      record.grid = await this.api.designerGenerate(prompt, wireWeight(weight));
    } catch (error) {
      // keep the record: the session survives backend failures
      record.error = error instanceof Error ? error.message : String(error);
    }
    return record;
  }
}
