/**
 * Typed client for the workbench HTTP API.
 *
 * The UI never computes statistics or assignment state itself; every piece
 * of session state is read from (and written through) these endpoints.
 */

export interface Progress {
  done: number;
  total: number;
}

export interface Definitions {
  feasibility: string;
  novelty: string;
}

export interface NextItem {
  complete: boolean;
  artifact_id?: string;
  image_url?: string;
  definitions?: Definitions;
  progress: Progress;
}

export interface RatingSubmission {
  artifact_id: string;
  feasibility: number;
  novelty: number;
  elapsed_ms: number;
}

export interface CadPreview {
  image_id: string;
  score: number;
  image_b64: string;
}

export interface DesignerArtifact {
  replicate: number;
  seed: number;
  image_b64: string;
}

export interface DesignerGrid {
  setting_label: string;
  cad_preview: CadPreview | null;
  artifacts: DesignerArtifact[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** The server surface the views depend on (fakeable in tests). */
export interface WorkbenchApi {
  getDefinitions(): Promise<Definitions>;
  getNext(raterId: string): Promise<NextItem>;
  submitRating(
    raterId: string,
    rating: RatingSubmission,
  ): Promise<{ ok: boolean; progress: Progress }>;
  imageUrl(artifactId: string): string;
  designerRetrieve(prompt: string): Promise<CadPreview>;
  designerGenerate(
    prompt: string,
    weight: number | null,
    seed?: number,
  ): Promise<DesignerGrid>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient implements WorkbenchApi {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        if (typeof body.detail === "string") detail = body.detail;
        else if (body.detail) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getDefinitions(): Promise<Definitions> {
    return this.request<Definitions>("/api/definitions");
  }

  getNext(raterId: string): Promise<NextItem> {
    return this.request<NextItem>(
      `/api/session/${encodeURIComponent(raterId)}/next`,
    );
  }

  submitRating(
    raterId: string,
    rating: RatingSubmission,
  ): Promise<{ ok: boolean; progress: Progress }> {
    return this.post(`/api/session/${encodeURIComponent(raterId)}/rating`, rating);
  }

  /** URL for an artifact's image bytes (for <img src>). */
  imageUrl(artifactId: string): string {
    return `${this.baseUrl}/api/artifact/${encodeURIComponent(artifactId)}/image`;
  }

  designerRetrieve(prompt: string): Promise<CadPreview> {
    return this.post("/api/designer/retrieve", { prompt });
  }

  designerGenerate(
    prompt: string,
    weight: number | null,
    seed?: number,
  ): Promise<DesignerGrid> {
    return this.post("/api/designer/generate", {
      prompt,
      weight,
      seed: seed ?? null,
    });
  }
}
