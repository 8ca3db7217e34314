// Typed client for the annotation service JSON API. The UI never
// recomputes report numbers; whatever the server sends is displayed.

export interface TripleKey {
  subject: string;
  relation: string;
  object: string;
  doc_id: string;
}

export interface Progress {
  completed: number;
  total: number;
}

export interface Card {
  triple_key: TripleKey;
  excerpt: string;
  progress: Progress;
}

export interface Report {
  total: number;
  counts: Record<string, number>;
  percentages: Record<string, number>;
}

export type NextResult = { done: true } | { done: false; card: Card };

export type SubmitResult = "ok" | "duplicate";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export const LABELS = ["correct", "incorrect", "partially_correct"] as const;
export type Label = (typeof LABELS)[number];

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async next(sessionId: string): Promise<NextResult> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}/next`));
    if (response.status === 204) {
      return { done: true };
    }
    if (!response.ok) {
      throw new ApiError(response.status, `next failed: HTTP ${response.status}`);
    }
    return { done: false, card: (await response.json()) as Card };
  }

  async submitVerdict(
    sessionId: string,
    key: TripleKey,
    label: Label,
    justification: string,
  ): Promise<SubmitResult> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}/verdicts`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        triple_key: [key.subject, key.relation, key.object, key.doc_id],
        label,
        justification,
      }),
    });
    if (response.status === 409) {
      return "duplicate";
    }
    if (!response.ok) {
      throw new ApiError(response.status, `verdict rejected: HTTP ${response.status}`);
    }
    return "ok";
  }

  async report(sessionId: string): Promise<Report> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}/report`));
    if (!response.ok) {
      throw new ApiError(response.status, `report failed: HTTP ${response.status}`);
    }
    return (await response.json()) as Report;
  }

  async judgeReport(runId: string): Promise<Report | null> {
    const response = await fetch(this.url(`/api/runs/${runId}/judge-report`));
    if (response.status === 404) {
      return null;
    }
    if (!response.ok) {
      throw new ApiError(response.status, `judge report failed: HTTP ${response.status}`);
    }
    return (await response.json()) as Report;
  }
}
