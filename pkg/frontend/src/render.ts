/** DOM-free HTML renderers. Every number shown comes verbatim from
 * service JSON: raw values ride along in data-value attributes so the
 * displayed text can be audited against the API payload. */

import type { DiffLine } from "./diff.js";
import type {
  AblationRowView,
  HistoryEntry,
  ProposalView,
  RecordView,
  RunHandleView,
  TemplateView,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function formatPercent(value: number): string {
  return `${(value * 100).toFixed(1)} %`;
}

const SECTION_ORDER = ["task", "context", "expertise", "output"] as const;

export function renderTemplateEditor(template: TemplateView): string {
  const panes = SECTION_ORDER.map(
    (section) => `
    <div class="section-pane" data-section="${section}">
      <label>${section.toUpperCase()}</label>
      <textarea id="edit-${section}" rows="10">${escapeHtml(template.sections[section] ?? "")}</textarea>
    </div>`,
  ).join("\n");
  return `
  <div class="template-editor" data-version="${template.version}">
    <h2>Template v${template.version}</h2>
    <p class="provenance">${escapeHtml(template.provenance)}</p>
    ${panes}
    <button id="save-template">Save as new version</button>
  </div>`;
}

export function renderHistory(history: HistoryEntry[]): string {
  const items = history
    .map(
      (entry) =>
        `<li data-version="${entry.version}">v${entry.version} — ${escapeHtml(entry.provenance)}</li>`,
    )
    .join("\n");
  return `<ul class="history">${items}</ul>`;
}

export function renderDiff(diffs: Record<string, DiffLine[]>): string {
  const blocks = Object.entries(diffs).map(([section, lines]) => {
    const body = lines
      .map((line) => `<div class="diff-${line.kind}">${escapeHtml(line.text)}</div>`)
      .join("\n");
    return `<div class="diff-section"><h4>${section}</h4><pre class="diff">${body}</pre></div>`;
  });
  return blocks.join("\n");
}

export function renderProposal(proposal: ProposalView, diffHtml: string): string {
  const buttons =
    proposal.status === "pending"
      ? `<button id="approve-proposal" data-id="${proposal.id}">Approve</button>
         <button id="reject-proposal" data-id="${proposal.id}">Reject</button>`
      : "";
  return `
  <div class="proposal" data-id="${proposal.id}" data-status="${proposal.status}">
    <h3>Proposal ${proposal.id} (${proposal.status})</h3>
    <p class="rationale">${escapeHtml(proposal.rationale)}</p>
    ${diffHtml}
    ${buttons}
  </div>`;
}

function metricCell(name: string, value: number): string {
  return `<td class="metric" data-metric="${name}" data-value="${value}">${formatPercent(value)}</td>`;
}

export function renderRunGrid(run: RunHandleView): string {
  const rows = run.rows ?? [];
  const body = rows
    .map(
      (row: AblationRowView) => `
    <tr data-config="${escapeHtml(row.config)}">
      <td>${escapeHtml(row.config)}</td>
      ${metricCell("precision", row.metrics.precision)}
      ${metricCell("recall", row.metrics.recall)}
      ${metricCell("f1", row.metrics.f1)}
      <td data-metric="input_tokens_total" data-value="${row.input_tokens_total}">${row.input_tokens_total}</td>
      <td data-metric="output_tokens_mean" data-value="${row.output_tokens_mean}">${row.output_tokens_mean.toFixed(1)}</td>
      <td data-metric="unparseable" data-value="${row.unparseable}">${row.unparseable}</td>
    </tr>`,
    )
    .join("\n");
  return `
  <table class="run-grid" data-run="${run.run_id}" data-status="${run.status}">
    <thead>
      <tr><th>Configuration</th><th>Precision</th><th>Recall</th><th>F1</th>
          <th>Input tokens</th><th>&empty; output tokens</th><th>Unparseable</th></tr>
    </thead>
    <tbody>${body}</tbody>
  </table>`;
}

export function renderRunList(runs: RunHandleView[]): string {
  const items = runs
    .map(
      (run) =>
        `<li data-run="${run.run_id}" data-status="${run.status}">
           ${run.run_id} [${run.status}] ${run.progress.evaluated}/${run.progress.total}
           ${run.error ? `<span class="error">${escapeHtml(run.error)}</span>` : ""}
         </li>`,
    )
    .join("\n");
  return `<ul class="run-list">${items}</ul>`;
}

/** Side-by-side inspection: verdict and reasoning against ground truth.
 * A parse failure shows the raw response text; no class is fabricated. */
export function renderRecordInspector(record: RecordView): string {
  const truth = `<span class="truth" data-value="${record.truth}">truth: ${record.truth}</span>`;
  let verdict: string;
  if (record.verdict.parse_failure !== undefined) {
    verdict = `
      <div class="verdict parse-failure">
        <strong>unparseable output</strong>
        <pre class="raw">${escapeHtml(record.verdict.parse_failure)}</pre>
      </div>`;
  } else {
    verdict = `
      <div class="verdict" data-classification="${record.verdict.classification}">
        <strong>classification: ${record.verdict.classification}</strong>
        <p class="reasoning">${escapeHtml(record.verdict.reasoning ?? "")}</p>
      </div>`;
  }
  return `
  <div class="record" data-sample="${escapeHtml(record.sample_id)}" data-config="${escapeHtml(record.config)}">
    <h3>${escapeHtml(record.sample_id)}</h3>
    ${truth}
    ${verdict}
    <p class="usage">tokens: ${record.usage.input_tokens} in / ${record.usage.output_tokens} out
       ${record.retried ? "(retried)" : ""}</p>
    <button id="draft-note" data-sample="${escapeHtml(record.sample_id)}">
      Draft expertise note from this case
    </button>
  </div>`;
}

export function renderError(message: string): string {
  return `<div class="banner error">${escapeHtml(message)}</div>`;
}
