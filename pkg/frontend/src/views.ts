/** DOM builders. Each render function replaces the contents of a container
 * from plain data; no business logic lives here. */

import type { ClassInfo, NextQuery, SessionDoc } from "./api.js";
import { GroupPreview, filterClasses, progressFraction } from "./state.js";

type Doc = Document;

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Doc,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface StartHandlers {
  onStart(novelName: string, similarId: string, strategy: string, budget: number): void;
}

export function renderStart(
  doc: Doc,
  root: HTMLElement,
  classes: ClassInfo[],
  strategies: string[],
  maxBudget: number,
  handlers: StartHandlers,
  error?: string,
): void {
  root.textContent = "";
  const panel = el(doc, "section", { class: "panel", id: "start-panel" });
  panel.append(el(doc, "h2", {}, "Introduce a novel class"));

  const nameField = el(doc, "input", {
    id: "novel-name",
    placeholder: "name of the new class",
  });
  panel.append(labelled(doc, "Novel class name", nameField));

  const search = el(doc, "input", {
    id: "class-search",
    placeholder: "search base classes…",
  });
  const picker = el(doc, "select", { id: "class-picker", size: "8" });
  const fill = (items: ClassInfo[]) => {
    picker.textContent = "";
    for (const c of items) {
      picker.append(
        el(doc, "option", { value: c.id }, `${c.name} (${c.id}, ${c.supercategory})`),
      );
    }
  };
  fill(classes);
  search.addEventListener("input", () => fill(filterClasses(classes, search.value)));
  panel.append(labelled(doc, "Most similar base class", search), picker);

  const strategySelect = el(doc, "select", { id: "strategy" });
  for (const s of strategies) strategySelect.append(el(doc, "option", { value: s }, s));
  panel.append(labelled(doc, "Query strategy", strategySelect));

  const budgetInput = el(doc, "input", {
    id: "budget",
    type: "number",
    min: "0",
    max: String(maxBudget),
    value: String(Math.min(9, maxBudget)),
  });
  panel.append(labelled(doc, `Annotation budget (0–${maxBudget} group queries)`, budgetInput));

  const startButton = el(doc, "button", { id: "start-button", disabled: "" }, "Start session");
  const sync = () => {
    const ready = picker.value !== "" && nameField.value.trim() !== "";
    if (ready) startButton.removeAttribute("disabled");
    else startButton.setAttribute("disabled", "");
  };
  nameField.addEventListener("input", sync);
  picker.addEventListener("change", sync);
  startButton.addEventListener("click", () => {
    handlers.onStart(
      nameField.value.trim(),
      picker.value,
      strategySelect.value,
      Number(budgetInput.value),
    );
  });
  panel.append(startButton);
  if (error) panel.append(el(doc, "p", { class: "error", id: "start-error" }, error));
  root.append(panel);
}

function labelled(doc: Doc, text: string, input: HTMLElement): HTMLElement {
  const wrap = el(doc, "label", { class: "field" });
  wrap.append(el(doc, "span", {}, text), input);
  return wrap;
}

export interface SessionHandlers {
  onSubmit(groupId: number, values: number[]): void;
  onFinalize(): void;
  onDownload(): void;
}

export function renderSession(
  doc: Doc,
  root: HTMLElement,
  session: SessionDoc,
  query: NextQuery | null,
  preview: GroupPreview[],
  handlers: SessionHandlers,
  error?: string,
): void {
  root.textContent = "";
  const panel = el(doc, "section", { class: "panel", id: "session-panel" });
  panel.append(
    el(doc, "h2", {}, `Annotating “${session.novel_id}”`),
    el(
      doc,
      "p",
      { class: "subtitle" },
      `similar class ${session.similar_id} · strategy ${session.strategy}`,
    ),
  );

  const bar = el(doc, "div", { class: "progress" });
  const fillWidth = Math.round(progressFraction(session) * 100);
  const fill = el(doc, "div", { class: "progress-fill", style: `width: ${fillWidth}%` });
  bar.append(fill);
  panel.append(
    bar,
    el(
      doc,
      "p",
      { id: "progress-text" },
      `${session.rounds_answered} of ${session.budget} queries answered`,
    ),
  );

  if (query !== null && !session.finalized) {
    const pane = el(doc, "div", { class: "query-pane", id: "query-pane" });
    pane.append(
      el(doc, "h3", {}, `Round ${query.round + 1}: ${query.group_name}`),
      el(
        doc,
        "p",
        { class: "hint" },
        "Sliders are prefilled with the values imputed from the similar class; adjust the ones that differ.",
      ),
    );
    const sliders: HTMLInputElement[] = [];
    for (const attr of query.attributes) {
      const slider = el(doc, "input", {
        type: "range",
        min: "0",
        max: "1",
        step: "0.01",
        value: String(attr.current_value),
        "data-index": String(attr.index),
        class: "attr-slider",
      });
      const valueLabel = el(doc, "span", { class: "value" }, attr.current_value.toFixed(2));
      slider.addEventListener("input", () => {
        valueLabel.textContent = Number(slider.value).toFixed(2);
      });
      const row = el(doc, "div", { class: "slider-row" });
      row.append(el(doc, "span", { class: "attr-name" }, attr.name), slider, valueLabel);
      pane.append(row);
      sliders.push(slider);
    }
    const submit = el(doc, "button", { id: "submit-answer" }, "Submit answers");
    submit.addEventListener("click", () => {
      handlers.onSubmit(
        query.group_id,
        sliders.map((s) => Number(s.value)),
      );
    });
    pane.append(submit);
    panel.append(pane);
  } else if (!session.finalized) {
    panel.append(
      el(doc, "p", { id: "budget-done" }, "Budget reached — finalize to train on this class."),
    );
  }

  if (!session.finalized) {
    const finalize = el(doc, "button", { id: "finalize-button" }, "Finalize and train");
    finalize.addEventListener("click", () => handlers.onFinalize());
    panel.append(finalize);
  }

  if (session.answers.length > 0) {
    const history = el(doc, "div", { class: "history" });
    history.append(el(doc, "h3", {}, "Answered rounds"));
    const list = el(doc, "ol", { id: "history-list" });
    for (const a of session.answers) {
      const name = session.group_names[a.group_id] ?? `group_${a.group_id}`;
      list.append(
        el(doc, "li", {}, `${name}: ${a.values.map((v) => v.toFixed(2)).join(", ")}`),
      );
    }
    history.append(list);
    panel.append(history);
  }

  const previewBox = el(doc, "div", { class: "preview" });
  previewBox.append(el(doc, "h3", {}, "Descriptor preview"));
  const grid = el(doc, "div", { id: "descriptor-preview", class: "preview-grid" });
  for (const group of preview) {
    const cell = el(doc, "div", { class: `group-cell ${group.status}` });
    cell.append(
      el(doc, "span", { class: "group-name" }, group.name),
      el(
        doc,
        "span",
        { class: "group-status" },
        group.status === "annotated" ? "annotated" : `imputed from ${session.similar_id}`,
      ),
      el(doc, "span", { class: "group-values" }, group.values.map((v) => v.toFixed(2)).join(" ")),
    );
    grid.append(cell);
  }
  previewBox.append(grid);
  panel.append(previewBox);

  if (error) panel.append(el(doc, "p", { class: "error", id: "session-error" }, error));
  root.append(panel);
}

export function renderFinalized(
  doc: Doc,
  root: HTMLElement,
  session: SessionDoc,
  jobStatus: string,
  metrics: { acc_unseen: number; acc_seen: number; harmonic: number } | null,
  preview: GroupPreview[],
  handlers: SessionHandlers,
): void {
  renderSession(doc, root, session, null, preview, handlers);
  const panel = root.querySelector("#session-panel")!;
  const box = el(doc, "div", { class: "metrics", id: "metrics-panel" });
  box.append(el(doc, "h3", {}, "Training"));
  box.append(el(doc, "p", { id: "job-status" }, `job status: ${jobStatus}`));
  if (metrics) {
    const table = el(doc, "table", { id: "metrics-table" });
    for (const [label, value] of [
      ["unseen accuracy", metrics.acc_unseen],
      ["seen accuracy", metrics.acc_seen],
      ["harmonic mean", metrics.harmonic],
    ] as const) {
      const row = el(doc, "tr", {});
      row.append(el(doc, "td", {}, label), el(doc, "td", {}, value.toFixed(3)));
      table.append(row);
    }
    box.append(table);
  }
  const download = el(doc, "button", { id: "download-transcript" }, "Download transcript");
  download.addEventListener("click", () => handlers.onDownload());
  box.append(download);
  panel.append(box);
}
