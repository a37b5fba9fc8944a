/** Verdict editor: per-element variable edits constrained to the adjustable
 * set, color pickers and opacity sliders, submit-once locking.
 */

import { ApiClient } from "./api.js";
import { DraftEdit, VerdictDraft, draftToVerdict, emptyDraft, validateDraft } from "./state.js";
import type { Category } from "./types.js";
import { CATEGORY_VARIABLES } from "./types.js";

export interface ManifestElements {
  icon: string[];
  label: string[];
  line: string[];
  fill: string[];
}

export class ReviewPanel {
  private draft: VerdictDraft = emptyDraft();
  private locked = false;
  private root: HTMLElement;
  private errorBox!: HTMLElement;
  private editList!: HTMLElement;
  private submitButton!: HTMLButtonElement;

  constructor(
    container: HTMLElement,
    private client: ApiClient,
    private runId: string,
    private manifest: ManifestElements,
    private onSubmitted: () => void,
  ) {
    this.root = container;
    this.render();
  }

  /** Unlock for a new awaiting window (fresh draft). */
  reset(): void {
    this.draft = emptyDraft();
    this.locked = false;
    this.render();
  }

  lock(): void {
    this.locked = true;
    this.render();
  }

  private elementsFor(category: Category): string[] {
    if (category === "background") return ["background"];
    return this.manifest[category] ?? [];
  }

  private render(): void {
    this.root.innerHTML = "";
    const title = document.createElement("h3");
    title.textContent = "Your verdict";
    this.root.appendChild(title);

    const decisionRow = document.createElement("div");
    decisionRow.className = "decision-row";
    for (const decision of ["Accept", "Revise"] as const) {
      const label = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = "decision";
      radio.value = decision;
      radio.checked = this.draft.decision === decision;
      radio.disabled = this.locked;
      radio.addEventListener("change", () => {
        this.draft.decision = decision;
        this.render();
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(decision));
      decisionRow.appendChild(label);
    }
    this.root.appendChild(decisionRow);

    this.editList = document.createElement("div");
    this.editList.className = "edit-list";
    this.root.appendChild(this.editList);
    if (this.draft.decision === "Revise") {
      this.draft.edits.forEach((edit, i) => this.renderEdit(edit, i));
      const add = document.createElement("button");
      add.textContent = "+ add element edit";
      add.disabled = this.locked;
      add.addEventListener("click", () => {
        this.draft.edits.push({
          element: "background",
          category: "background",
          changes: { "background-color": "#ffffff" },
          explanation: "",
        });
        this.render();
      });
      this.root.appendChild(add);
    }

    const commentary = document.createElement("textarea");
    commentary.placeholder = "Overall assessment (optional)";
    commentary.value = this.draft.commentary;
    commentary.disabled = this.locked;
    commentary.addEventListener("input", () => {
      this.draft.commentary = commentary.value;
    });
    this.root.appendChild(commentary);

    this.errorBox = document.createElement("div");
    this.errorBox.className = "error-box";
    this.root.appendChild(this.errorBox);

    this.submitButton = document.createElement("button");
    this.submitButton.className = "submit-verdict";
    this.submitButton.textContent = this.locked ? "Verdict recorded" : "Submit verdict";
    this.submitButton.disabled = this.locked;
    this.submitButton.addEventListener("click", () => void this.submit());
    this.root.appendChild(this.submitButton);
  }

  private renderEdit(edit: DraftEdit, index: number): void {
    const box = document.createElement("div");
    box.className = "edit-box";

    const categorySelect = document.createElement("select");
    for (const category of Object.keys(CATEGORY_VARIABLES) as Category[]) {
      const option = document.createElement("option");
      option.value = category;
      option.textContent = category;
      option.selected = edit.category === category;
      categorySelect.appendChild(option);
    }
    categorySelect.disabled = this.locked;
    categorySelect.addEventListener("change", () => {
      const category = categorySelect.value as Category;
      edit.category = category;
      edit.element = this.elementsFor(category)[0] ?? "";
      edit.changes = {};
      this.render();
    });
    box.appendChild(categorySelect);

    const elementSelect = document.createElement("select");
    for (const name of this.elementsFor(edit.category)) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      option.selected = edit.element === name;
      elementSelect.appendChild(option);
    }
    elementSelect.disabled = this.locked || edit.category === "background";
    elementSelect.addEventListener("change", () => {
      edit.element = elementSelect.value;
    });
    box.appendChild(elementSelect);

    for (const variable of CATEGORY_VARIABLES[edit.category]) {
      const row = document.createElement("label");
      row.className = "variable-row";
      const toggle = document.createElement("input");
      toggle.type = "checkbox";
      toggle.checked = variable in edit.changes;
      toggle.disabled = this.locked;
      row.appendChild(toggle);
      row.appendChild(document.createTextNode(variable));

      let input: HTMLInputElement;
      if (variable.endsWith("color")) {
        input = document.createElement("input");
        input.type = "color";
        input.value = String(edit.changes[variable] ?? "#888888");
      } else if (variable.endsWith("opacity")) {
        input = document.createElement("input");
        input.type = "range";
        input.min = "0";
        input.max = "1";
        input.step = "0.05";
        input.value = String(edit.changes[variable] ?? 1);
      } else {
        input = document.createElement("input");
        input.type = "text";
        input.value = String(edit.changes[variable] ?? "");
      }
      input.disabled = this.locked || !toggle.checked;
      const apply = () => {
        if (!toggle.checked) {
          delete edit.changes[variable];
        } else if (variable.endsWith("opacity")) {
          edit.changes[variable] = Number(input.value);
        } else {
          edit.changes[variable] = input.value;
        }
      };
      toggle.addEventListener("change", () => {
        input.disabled = this.locked || !toggle.checked;
        apply();
      });
      input.addEventListener("input", apply);
      apply();
      row.appendChild(input);
      box.appendChild(row);
    }

    const explanation = document.createElement("input");
    explanation.type = "text";
    explanation.placeholder = "why this change helps";
    explanation.value = edit.explanation;
    explanation.disabled = this.locked;
    explanation.addEventListener("input", () => {
      edit.explanation = explanation.value;
    });
    box.appendChild(explanation);

    const remove = document.createElement("button");
    remove.textContent = "remove";
    remove.disabled = this.locked;
    remove.addEventListener("click", () => {
      this.draft.edits.splice(index, 1);
      this.render();
    });
    box.appendChild(remove);

    this.editList.appendChild(box);
  }

  private async submit(): Promise<void> {
    const problems = validateDraft(this.draft);
    if (problems.length) {
      this.errorBox.textContent = problems.join("; ");
      return;
    }
    this.submitButton.disabled = true;
    try {
      await this.client.postVerdict(this.runId, draftToVerdict(this.draft));
      this.lock();
      this.onSubmitted();
    } catch (err: any) {
      this.errorBox.textContent =
        err?.status === 409 ? "verdict already recorded" : `submit failed: ${err?.message ?? err}`;
      this.submitButton.disabled = this.locked;
    }
  }
}
