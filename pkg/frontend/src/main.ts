/** Browser wiring. Mutations round-trip to the service before the view
 * updates; nothing is rendered optimistically. */

import { ApiError, WorkbenchApi } from "./api.js";
import { sectionDiffs } from "./diff.js";
import {
  initialState,
  prefillRefine,
  selectRecord,
  selectRun,
  showError,
  showProposal,
  showRuns,
  showTemplate,
  type ViewState,
} from "./state.js";
import {
  renderDiff,
  renderError,
  renderHistory,
  renderProposal,
  renderRecordInspector,
  renderRunGrid,
  renderRunList,
  renderTemplateEditor,
} from "./render.js";
import type { RecordFilter } from "./types.js";

const api = new WorkbenchApi("");
let state: ViewState = initialState();

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function paint(): void {
  el("error-pane").innerHTML = state.error ? renderError(state.error) : "";
  if (state.template) {
    el("template-pane").innerHTML = renderTemplateEditor(state.template);
    el("history-pane").innerHTML = renderHistory(state.history);
    wireTemplateEditor();
  }
  el("proposal-pane").innerHTML = state.proposal
    ? renderProposal(state.proposal, renderDiff(sectionDiffs(state.proposal.current, state.proposal.proposed)))
    : "";
  wireProposalButtons();
  el("runs-pane").innerHTML = renderRunList(state.runs);
  wireRunList();
  el("grid-pane").innerHTML = state.selectedRun ? renderRunGrid(state.selectedRun) : "";
  el("inspector-pane").innerHTML = state.selectedRecord
    ? renderRecordInspector(state.selectedRecord)
    : renderRecordList();
  wireInspector();
  (el("refine-notes") as HTMLTextAreaElement).value = state.refineNotes;
}

function renderRecordList(): string {
  if (!state.records.length) return "";
  const items = state.records
    .map(
      (record, index) =>
        `<li><a href="#" data-record-index="${index}">${record.sample_id} (${record.config})</a></li>`,
    )
    .join("");
  return `<ul class="record-list">${items}</ul>`;
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (error) {
    const message = error instanceof ApiError ? error.message : String(error);
    state = showError(state, message);
  }
  paint();
}

async function refreshTemplate(): Promise<void> {
  const [template, history] = await Promise.all([api.getTemplate(), api.history()]);
  state = showTemplate(state, template, history);
}

function wireTemplateEditor(): void {
  const button = document.getElementById("save-template");
  button?.addEventListener("click", () =>
    guard(async () => {
      const sections: Record<string, string> = {};
      for (const section of ["task", "context", "expertise", "output"]) {
        const area = document.getElementById(`edit-${section}`) as HTMLTextAreaElement | null;
        if (area) sections[section] = area.value;
      }
      await api.putTemplate(sections);
      await refreshTemplate();
    }),
  );
}

function wireProposalButtons(): void {
  document.getElementById("approve-proposal")?.addEventListener("click", (event) =>
    guard(async () => {
      const id = (event.target as HTMLElement).dataset.id!;
      await api.approve(id);
      state = showProposal(state, null);
      await refreshTemplate();
    }),
  );
  document.getElementById("reject-proposal")?.addEventListener("click", (event) =>
    guard(async () => {
      const id = (event.target as HTMLElement).dataset.id!;
      const proposal = await api.reject(id);
      state = showProposal(state, proposal);
    }),
  );
}

function wireRunList(): void {
  for (const item of document.querySelectorAll<HTMLElement>(".run-list li")) {
    item.addEventListener("click", () =>
      guard(async () => {
        const runId = item.dataset.run!;
        const run = await api.getRun(runId);
        const filter = (el("record-filter") as HTMLSelectElement).value as RecordFilter;
        const records = run.status === "done" ? await api.records(runId, filter) : [];
        state = selectRun(state, run, records);
      }),
    );
  }
}

function wireInspector(): void {
  for (const link of document.querySelectorAll<HTMLElement>("[data-record-index]")) {
    link.addEventListener("click", (event) => {
      event.preventDefault();
      const index = Number(link.dataset.recordIndex);
      const record = state.records[index];
      if (record) {
        state = selectRecord(state, record);
        paint();
      }
    });
  }
  document.getElementById("draft-note")?.addEventListener("click", () => {
    if (state.selectedRecord) {
      state = prefillRefine(state, state.selectedRecord);
      paint();
    }
  });
}

function wireStaticControls(): void {
  el("refine-send").addEventListener("click", () =>
    guard(async () => {
      const notes = (el("refine-notes") as HTMLTextAreaElement).value;
      const targets = Array.from(
        document.querySelectorAll<HTMLInputElement>(".target-section:checked"),
      ).map((box) => box.value);
      const proposal = await api.refine(notes, targets);
      state = showProposal(state, proposal);
      state.refineNotes = notes;
    }),
  );
  el("launch-run").addEventListener("click", () =>
    guard(async () => {
      const scenario = (el("run-scenario") as HTMLInputElement).value;
      const configs = (el("run-configs") as HTMLInputElement).value
        .split(",")
        .map((label) => label.trim())
        .filter(Boolean);
      const mode = (el("run-mode") as HTMLSelectElement).value;
      await api.createRun(scenario, configs, mode);
      state = showRuns(state, await api.listRuns());
    }),
  );
  el("refresh-runs").addEventListener("click", () =>
    guard(async () => {
      state = showRuns(state, await api.listRuns());
    }),
  );
}

guard(async () => {
  wireStaticControls();
  await refreshTemplate();
  state = showRuns(state, await api.listRuns());
});
