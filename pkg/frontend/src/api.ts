/** Typed client for the annotation service's JSON API (/api/v1). */

export interface ClassInfo {
  id: string;
  name: string;
  supercategory: string;
}

export interface Meta {
  n_groups: number;
  d: number;
  m: number;
  strategies: string[];
  groups: { group_id: number; name: string; members: number[] }[];
}

export interface QueryAttribute {
  index: number;
  name: string;
  current_value: number;
}

export interface NextQuery {
  round: number;
  group_id: number;
  group_name: string;
  attributes: QueryAttribute[];
}

export interface SessionDoc {
  session_id: string;
  novel_id: string;
  similar_id: string;
  strategy: string;
  budget: number;
  rounds_answered: number;
  answers: { round: number; group_id: number; values: number[] }[];
  answered_groups: number[];
  descriptor: number[];
  group_names: string[];
  finalized: boolean;
  job_id: string | null;
}

export interface FinalizeResult {
  descriptor: number[];
  training_job_id: string;
}

export interface JobStatus {
  status: "queued" | "running" | "done" | "failed";
  metrics?: { acc_unseen: number; acc_seen: number; harmonic: number };
  error?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}/api/v1${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        body.code ?? "error",
        body.message ?? response.statusText,
      );
    }
    return body as T;
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/meta");
  }

  classes(): Promise<ClassInfo[]> {
    return this.request<ClassInfo[]>("/classes");
  }

  createSession(body: {
    novel_name: string;
    similar_class_id: string;
    strategy: string;
    budget: number;
  }): Promise<{ session_id: string }> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  nextQuery(sessionId: string): Promise<NextQuery> {
    return this.request(`/sessions/${sessionId}/next-query`);
  }

  answer(
    sessionId: string,
    groupId: number,
    values: number[],
  ): Promise<{ imputed_changed_indices: number[] }> {
    return this.request(`/sessions/${sessionId}/answers`, {
      method: "POST",
      body: JSON.stringify({ group_id: groupId, values }),
    });
  }

  finalize(sessionId: string): Promise<FinalizeResult> {
    return this.request(`/sessions/${sessionId}/finalize`, { method: "POST" });
  }

  session(sessionId: string): Promise<SessionDoc> {
    return this.request(`/sessions/${sessionId}`);
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request(`/jobs/${jobId}`);
  }
}
