/** Typed client for the annotation service's JSON API (/api/v1). */
export class ApiError extends Error {
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
export class ApiClient {
    constructor(base = "", fetchFn = fetch) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    async request(path, init) {
        const response = await this.fetchFn(`${this.base}/api/v1${path}`, {
            headers: { "content-type": "application/json" },
            ...init,
        });
        const body = await response.json().catch(() => ({}));
        if (!response.ok) {
            throw new ApiError(response.status, body.code ?? "error", body.message ?? response.statusText);
        }
        return body;
    }
    meta() {
        return this.request("/meta");
    }
    classes() {
        return this.request("/classes");
    }
    createSession(body) {
        return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
    }
    nextQuery(sessionId) {
        return this.request(`/sessions/${sessionId}/next-query`);
    }
    answer(sessionId, groupId, values) {
        return this.request(`/sessions/${sessionId}/answers`, {
            method: "POST",
            body: JSON.stringify({ group_id: groupId, values }),
        });
    }
    finalize(sessionId) {
        return this.request(`/sessions/${sessionId}/finalize`, { method: "POST" });
    }
    session(sessionId) {
        return this.request(`/sessions/${sessionId}`);
    }
    job(jobId) {
        return this.request(`/jobs/${jobId}`);
    }
}
