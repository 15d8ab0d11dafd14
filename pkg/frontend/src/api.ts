/** Typed client for the inspection service. Every mutation round-trips;
 * errors surface as ApiError and are never retried silently. */

import type {
  HistoryEntry,
  ProposalView,
  RecordFilter,
  RecordView,
  RunHandleView,
  TemplateView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class WorkbenchApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getTemplate(): Promise<TemplateView> {
    return this.request("/template");
  }

  getTemplateVersion(version: number): Promise<TemplateView> {
    return this.request(`/template/${version}`);
  }

  putTemplate(sections: Record<string, string>): Promise<TemplateView> {
    return this.request("/template", {
      method: "PUT",
      body: JSON.stringify({ sections }),
    });
  }

  history(): Promise<HistoryEntry[]> {
    return this.request("/template/history");
  }

  refine(notes: string, targetSections: string[]): Promise<ProposalView> {
    return this.request("/refine", {
      method: "POST",
      body: JSON.stringify({ notes, target_sections: targetSections }),
    });
  }

  approve(proposalId: string): Promise<TemplateView> {
    return this.request(`/proposals/${proposalId}/approve`, { method: "POST" });
  }

  reject(proposalId: string): Promise<ProposalView> {
    return this.request(`/proposals/${proposalId}/reject`, { method: "POST" });
  }

  createRun(scenario: string, configs: string[], mode: string): Promise<RunHandleView> {
    return this.request("/runs", {
      method: "POST",
      body: JSON.stringify({ scenario, configs, mode }),
    });
  }

  listRuns(): Promise<RunHandleView[]> {
    return this.request("/runs");
  }

  getRun(runId: string): Promise<RunHandleView> {
    return this.request(`/runs/${runId}`);
  }

  records(runId: string, filter: RecordFilter = "all"): Promise<RecordView[]> {
    return this.request(`/runs/${runId}/records?filter=${filter}`);
  }

  /** Poll until the run leaves the queue; the UI renders only fetched state. */
  async waitForRun(runId: string, intervalMs = 250, timeoutMs = 60_000): Promise<RunHandleView> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const run = await this.getRun(runId);
      if (run.status === "done" || run.status === "failed") return run;
      if (Date.now() > deadline) throw new Error(`run ${runId} did not finish in ${timeoutMs} ms`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
