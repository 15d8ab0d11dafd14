/** Section-level line diff for proposal review; added lines get highlighted. */

export type DiffKind = "same" | "added" | "removed";

export interface DiffLine {
  kind: DiffKind;
  text: string;
}

/** Longest-common-subsequence line diff (small inputs, O(n*m) is fine). */
export function diffLines(before: string, after: string): DiffLine[] {
  const a = before.length ? before.split("\n") : [];
  const b = after.length ? after.split("\n") : [];
  const n = a.length;
  const m = b.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array<number>(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i]![j] = a[i] === b[j] ? lcs[i + 1]![j + 1]! + 1 : Math.max(lcs[i + 1]![j]!, lcs[i]![j + 1]!);
    }
  }
  const out: DiffLine[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      out.push({ kind: "same", text: a[i]! });
      i++;
      j++;
    } else if (lcs[i + 1]![j]! >= lcs[i]![j + 1]!) {
      out.push({ kind: "removed", text: a[i]! });
      i++;
    } else {
      out.push({ kind: "added", text: b[j]! });
      j++;
    }
  }
  for (; i < n; i++) out.push({ kind: "removed", text: a[i]! });
  for (; j < m; j++) out.push({ kind: "added", text: b[j]! });
  return out;
}

/** One diff per proposed section, keyed by section name. */
export function sectionDiffs(
  current: Record<string, string>,
  proposed: Record<string, string>,
): Record<string, DiffLine[]> {
  const out: Record<string, DiffLine[]> = {};
  for (const section of Object.keys(proposed)) {
    out[section] = diffLines(current[section] ?? "", proposed[section] ?? "");
  }
  return out;
}

export function addedLineCount(diff: DiffLine[]): number {
  return diff.filter((line) => line.kind === "added").length;
}
