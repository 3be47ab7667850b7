/** Application wiring: server state in, rendered DOM out.
 *
 * The server decides every query; this console only displays state and
 * forwards the expert's slider values. Every view is reconstructed from
 * fresh GETs, so a hard refresh (session id lives in the URL hash) lands on
 * the identical screen.
 */
import { ApiClient, ApiError } from "./api.js";
import { descriptorPreview, phaseOf, sessionIdFromHash } from "./state.js";
import { renderFinalized, renderSession, renderStart } from "./views.js";
export class App {
    constructor(root, api, options = {}) {
        this.root = root;
        this.api = api;
        this.classes = [];
        this.sessionId = null;
        this.win = options.window ?? window;
        this.doc = this.win.document;
        this.pollInterval = options.pollIntervalMs ?? 1000;
    }
    async start() {
        [this.meta, this.classes] = await Promise.all([this.api.meta(), this.api.classes()]);
        this.sessionId = sessionIdFromHash(this.win.location.hash);
        await this.refresh();
    }
    /** Re-derive the whole view from the server; safe to call at any time. */
    async refresh(error) {
        if (this.sessionId === null) {
            this.renderStartScreen(error);
            return;
        }
        let session;
        try {
            session = await this.api.session(this.sessionId);
        }
        catch (e) {
            // Stale hash (e.g. server restarted with a fresh directory).
            this.sessionId = null;
            this.renderStartScreen(e instanceof ApiError ? e.message : String(e));
            return;
        }
        const phase = phaseOf(session);
        if (phase === "finalized") {
            await this.renderFinalizedScreen(session);
            return;
        }
        let query = null;
        if (phase === "annotating") {
            query = await this.api.nextQuery(this.sessionId);
        }
        const preview = descriptorPreview(session, this.meta.groups.map((g) => g.members));
        renderSession(this.doc, this.root, session, query, preview, {
            onSubmit: (groupId, values) => void this.submit(groupId, values),
            onFinalize: () => void this.finalize(),
            onDownload: () => void this.download(session),
        }, error);
    }
    renderStartScreen(error) {
        // The exemplar-image strategy needs feature vectors the browser form
        // cannot supply; everything else is selectable.
        const strategies = this.meta.strategies.filter((s) => s !== "image_based");
        renderStart(this.doc, this.root, this.classes, strategies, this.meta.n_groups, {
            onStart: (novelName, similarId, strategy, budget) => void this.createSession(novelName, similarId, strategy, budget),
        }, error);
    }
    async createSession(novelName, similarId, strategy, budget) {
        try {
            const { session_id } = await this.api.createSession({
                novel_name: novelName,
                similar_class_id: similarId,
                strategy,
                budget,
            });
            this.sessionId = session_id;
            this.win.location.hash = `#session=${session_id}`;
            await this.refresh();
        }
        catch (e) {
            this.renderStartScreen(e instanceof ApiError ? e.message : String(e));
        }
    }
    async submit(groupId, values) {
        if (!values.every((v) => Number.isFinite(v) && v >= 0 && v <= 1)) {
            await this.refresh("slider values must stay within [0, 1]");
            return;
        }
        try {
            await this.api.answer(this.sessionId, groupId, values);
        }
        catch (e) {
            if (e instanceof ApiError && (e.status === 409 || e.status === 400)) {
                // Duplicate submit or raced round: re-fetching shows the true state
                // without duplicating anything.
                await this.refresh(e.message);
                return;
            }
            throw e;
        }
        await this.refresh();
    }
    async finalize() {
        try {
            await this.api.finalize(this.sessionId);
        }
        catch (e) {
            if (!(e instanceof ApiError && e.status === 409))
                throw e;
        }
        await this.refresh();
    }
    async renderFinalizedScreen(session) {
        const preview = descriptorPreview(session, this.meta.groups.map((g) => g.members));
        const handlers = {
            onSubmit: () => { },
            onFinalize: () => { },
            onDownload: () => void this.download(session),
        };
        const poll = async () => {
            const job = session.job_id ? await this.api.job(session.job_id) : null;
            const status = job?.status ?? "unknown";
            renderFinalized(this.doc, this.root, session, status, job?.metrics ?? null, preview, handlers);
            if (status === "queued" || status === "running") {
                this.win.setTimeout(() => void poll(), this.pollInterval);
            }
        };
        await poll();
    }
    async download(session) {
        const fresh = await this.api.session(session.session_id);
        const blob = new Blob([JSON.stringify(fresh, null, 2)], { type: "application/json" });
        const link = this.doc.createElement("a");
        link.href = URL.createObjectURL(blob);
        link.download = `session-${session.session_id}.json`;
        link.click();
        URL.revokeObjectURL(link.href);
    }
}
export async function initApp(root, api, options = {}) {
    const app = new App(root, api, options);
    await app.start();
    return app;
}
if (typeof document !== "undefined" && typeof __FIELDGUIDE_TEST__ === "undefined") {
    const root = document.getElementById("app");
    if (root) {
        void initApp(root, new ApiClient()).catch((e) => {
            root.textContent = `failed to reach the annotation service: ${e}`;
        });
    }
}
