/** View state for the expert loop. The UI is stateless with respect to
 * truth: everything here is a copy of fetched service JSON, and the
 * template invariant (only versions present in the history may be shown)
 * is enforced at update time. */

import type {
  HistoryEntry,
  ProposalView,
  RecordView,
  RunHandleView,
  TemplateView,
} from "./types.js";

export interface ViewState {
  template: TemplateView | null;
  history: HistoryEntry[];
  proposal: ProposalView | null;
  runs: RunHandleView[];
  selectedRun: RunHandleView | null;
  records: RecordView[];
  selectedRecord: RecordView | null;
  refineNotes: string;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    template: null,
    history: [],
    proposal: null,
    runs: [],
    selectedRun: null,
    records: [],
    selectedRecord: null,
    refineNotes: "",
    error: null,
  };
}

/** Install a fetched template; rejects versions the service history does
 * not know about (the "never display an unlisted version" invariant). */
export function showTemplate(
  state: ViewState,
  template: TemplateView,
  history: HistoryEntry[],
): ViewState {
  if (!history.some((entry) => entry.version === template.version)) {
    throw new Error(`template v${template.version} is not in the service history`);
  }
  return { ...state, template, history, error: null };
}

export function showProposal(state: ViewState, proposal: ProposalView | null): ViewState {
  return { ...state, proposal, error: null };
}

export function showRuns(state: ViewState, runs: RunHandleView[]): ViewState {
  return { ...state, runs, error: null };
}

export function selectRun(state: ViewState, run: RunHandleView, records: RecordView[]): ViewState {
  return { ...state, selectedRun: run, records, selectedRecord: null, error: null };
}

export function selectRecord(state: ViewState, record: RecordView): ViewState {
  return { ...state, selectedRecord: record };
}

export function showError(state: ViewState, error: string): ViewState {
  return { ...state, error };
}

/** Pre-fill for the refine dialog from a misclassified case, closing the
 * expert's feedback loop. */
export function draftNoteFromRecord(record: RecordView): string {
  const verdict =
    record.verdict.parse_failure !== undefined
      ? "an unparseable answer"
      : `class ${record.verdict.classification}`;
  const truth = record.truth === 1 ? "anomalous" : "non-anomalous";
  const reasoning = record.verdict.reasoning ?? record.verdict.parse_failure ?? "";
  return (
    `Sample ${record.sample_id} is ${truth} but the detector returned ${verdict}.\n` +
    `Its reasoning was: "${reasoning}"\n` +
    `Add an expertise rule that decides this case correctly.`
  );
}

export function prefillRefine(state: ViewState, record: RecordView): ViewState {
  return { ...state, refineNotes: draftNoteFromRecord(record) };
}
