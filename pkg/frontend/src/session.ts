import { CLASS_NAMES, type ClassName, type ClassificationResult, type SessionEntry, type SessionTally } from "./types.js";

// In-memory only by design: a page reload starts a fresh inspection session.

let nextId = 1;

export function makeEntry(
  result: ClassificationResult,
  thumbnail: string,
  timestamp: number = Date.now(),
): SessionEntry {
  return { id: nextId++, thumbnail, result, timestamp, override: null };
}

/** The label that counts for tallies: the operator's override wins over the model. */
export function effectiveLabel(entry: SessionEntry): ClassName {
  return entry.override ?? entry.result.label;
}

export function setOverride(entry: SessionEntry, label: ClassName | null): SessionEntry {
  return { ...entry, override: label };
}

export function tally(entries: readonly SessionEntry[]): SessionTally {
  const counts = Object.fromEntries(CLASS_NAMES.map((c) => [c, 0])) as Record<ClassName, number>;
  for (const entry of entries) {
    counts[effectiveLabel(entry)] += 1;
  }
  const total = entries.length;
  return {
    counts,
    total,
    defectivePercent: total === 0 ? 0 : (counts.defect / total) * 100,
  };
}
