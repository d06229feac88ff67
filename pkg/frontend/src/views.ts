/**
 * DOM rendering for the two flows. Plain DOM, no framework: each view owns
 * one container and re-renders from its session object after every state
 * change (server responses are the single source of truth).
 */

import { WorkbenchApi } from "./api.js";
import { DesignerSession, GenerationRecord } from "./designer.js";
import { RaterSession, Scale } from "./rater.js";
import {
  CANONICAL_WEIGHTS,
  WEIGHT_MAX,
  WEIGHT_MIN,
  WeightSetting,
  parseWeightInput,
  weightLabel,
} from "./weight.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function pngSrc(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

// ---------------------------------------------------------------------------
// rater survey

function likertRow(
  doc: Document,
  session: RaterSession,
  scale: Scale,
  statement: string,
  rerender: () => void,
): HTMLElement {
  const row = el(doc, "div", { class: "likert-row" });
  row.append(el(doc, "p", { class: "statement" }, statement));
  const options = el(doc, "div", { class: "likert-options" });
  for (let value = 1; value <= 7; value++) {
    const label = el(doc, "label", { class: "likert-option" });
    const input = el(doc, "input", {
      type: "radio",
      name: `${scale}-scale`,
      value: String(value),
      "data-scale": scale,
    }) as HTMLInputElement;
    if (session.answers[scale] === value) input.checked = true;
    input.addEventListener("change", () => {
      session.setAnswer(scale, value);
      rerender();
    });
    label.append(input, String(value));
    options.append(label);
  }
  row.append(
    options,
    el(
      doc,
      "div",
      { class: "likert-legend" },
      el(doc, "span", {}, "Strongly disagree"),
      el(doc, "span", {}, "Strongly agree"),
    ),
  );
  return row;
}

export function renderRater(
  container: HTMLElement,
  session: RaterSession,
  api: WorkbenchApi,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const item = session.current;
  if (!item) {
    container.append(el(doc, "p", { class: "status" }, "Loading…"));
    return;
  }
  if (item.complete) {
    container.append(
      el(doc, "div", { class: "complete-screen" },
        el(doc, "h2", {}, "All done — thank you!"),
        el(doc, "p", {},
          `You rated ${item.progress.done} of ${item.progress.total} designs.`),
      ),
    );
    return;
  }

  if (item.definitions) {
    container.append(
      el(doc, "aside", { class: "definitions" },
        el(doc, "p", {}, item.definitions.feasibility),
        el(doc, "p", {}, item.definitions.novelty),
      ),
    );
  }
  container.append(
    el(doc, "p", { class: "progress" },
      `Design ${item.progress.done + 1} of ${item.progress.total}`),
  );
  if (item.artifact_id) {
    container.append(
      el(doc, "img", {
        class: "artifact",
        src: api.imageUrl(item.artifact_id),
        alt: "generated bike design",
      }),
    );
  }

  const rerender = () => renderRater(container, session, api);
  container.append(
    likertRow(doc, session, "feasibility", "The bike is feasible.", rerender),
    likertRow(doc, session, "novelty", "The bike is novel.", rerender),
  );

  const submit = el(doc, "button", { class: "submit" }, "Submit") as HTMLButtonElement;
  submit.disabled = !session.canSubmit();
  submit.addEventListener("click", () => {
    if (!session.canSubmit()) return;
    submit.disabled = true;
    session
      .submit()
      .catch(() => session.load())
      .then(() => rerender());
  });
  container.append(submit);
}

// ---------------------------------------------------------------------------
// designer console

function weightControl(
  doc: Document,
): { root: HTMLElement; read: () => WeightSetting } {
  const root = el(doc, "div", { class: "weight-control" });
  const off = el(doc, "input", { type: "checkbox", id: "weight-off", checked: "" }) as HTMLInputElement;
  const slider = el(doc, "input", {
    type: "range",
    min: String(WEIGHT_MIN),
    max: String(WEIGHT_MAX),
    step: "0.01",
    value: String(WEIGHT_MIN),
    list: "weight-detents",
    disabled: "",
  }) as HTMLInputElement;
  const detents = el(doc, "datalist", { id: "weight-detents" });
  for (const w of CANONICAL_WEIGHTS) {
    detents.append(el(doc, "option", { value: String(w), label: weightLabel(w) }));
  }
  const readout = el(doc, "span", { class: "weight-readout" }, weightLabel("off"));

  const read = (): WeightSetting =>
    off.checked ? "off" : parseWeightInput(slider.value);
  const update = () => {
    slider.disabled = off.checked;
    readout.textContent = weightLabel(read());
  };
  off.addEventListener("change", update);
  slider.addEventListener("input", update);

  root.append(
    el(doc, "label", { for: "weight-off" }, "CAD prompt off "),
    off,
    slider,
    detents,
    readout,
  );
  return { root, read };
}

function renderRecord(doc: Document, record: GenerationRecord): HTMLElement {
  const pane = el(doc, "div", { class: "generation" });
  pane.append(
    el(doc, "p", { class: "generation-title" },
      `"${record.prompt}" — ${weightLabel(record.weight)}`),
  );
  if (record.preview) {
    pane.append(
      el(doc, "figure", { class: "cad-preview" },
        el(doc, "img", { src: pngSrc(record.preview.image_b64), alt: "CAD preview" }),
        el(doc, "figcaption", {},
          `${record.preview.image_id} — similarity ${record.preview.score.toFixed(3)}`),
      ),
    );
  }
  const grid = el(doc, "div", { class: "thumb-grid" });
  if (record.grid) {
    for (const artifact of record.grid.artifacts) {
      grid.append(
        el(doc, "img", {
          class: "thumb",
          src: pngSrc(artifact.image_b64),
          alt: `generation ${artifact.replicate}`,
        }),
      );
    }
  } else if (record.error) {
    // one error tile per expected cell keeps the grid shape readable
    for (let i = 0; i < 4; i++) {
      grid.append(el(doc, "div", { class: "thumb error-tile" }, record.error));
    }
  } else {
    grid.append(el(doc, "p", { class: "status" }, "Generating…"));
  }
  pane.append(grid);
  return pane;
}

export function renderDesigner(
  container: HTMLElement,
  session: DesignerSession,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();

  const form = el(doc, "div", { class: "designer-form" });
  const prompt = el(doc, "input", {
    type: "text",
    class: "prompt-input",
    placeholder: "Describe the bike you want…",
  }) as HTMLInputElement;
  const control = weightControl(doc);
  const error = el(doc, "p", { class: "form-error" });
  const generate = el(doc, "button", { class: "generate" }, "Generate") as HTMLButtonElement;

  const output = el(doc, "div", { class: "designer-output" });
  const historyPane = el(doc, "ul", { class: "history" });

  const redrawHistory = () => {
    historyPane.replaceChildren();
    session.history.forEach((record, index) => {
      const entry = el(doc, "li", {},
        el(doc, "button", { class: "history-entry", "data-index": String(index) },
          `${index + 1}. "${record.prompt}" ${weightLabel(record.weight)}` +
            (record.error ? " (failed)" : "")),
      );
      entry.querySelector("button")?.addEventListener("click", () => {
        output.replaceChildren(renderRecord(doc, session.open(index)));
      });
      historyPane.append(entry);
    });
  };

  generate.addEventListener("click", () => {
    error.textContent = "";
    let current: WeightSetting;
    try {
      current = control.read();
      if (!prompt.value.trim()) throw new Error("enter a prompt first");
    } catch (exc) {
      error.textContent = exc instanceof Error ? exc.message : String(exc);
      return;
    }
    generate.disabled = true;
    const pending = session.generate(prompt.value, current);
    // show the CAD preview as soon as retrieval answers, before the grid
    session.onPreview = (record) => {
      if (session.history[session.history.length - 1] === record) {
        output.replaceChildren(renderRecord(doc, record));
      }
    };
    redrawHistory();
    pending
      .then((record) => {
        output.replaceChildren(renderRecord(doc, record));
        redrawHistory();
      })
      .finally(() => {
        generate.disabled = false;
      });
  });

  form.append(prompt, control.root, generate, error);
  container.append(form, output, historyPane);
  redrawHistory();
}
