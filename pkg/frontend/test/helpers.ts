import type { ClassName, ClassificationResult } from "../src/types.js";

export function fixedResult(
  label: ClassName,
  lead = 0.91,
  overrides: Partial<ClassificationResult> = {},
): ClassificationResult {
  const rest = (1 - lead) / 3;
  const probabilities = { defect: rest, fresh: rest, immature: rest, mature: rest };
  probabilities[label] = lead;
  return {
    label,
    probabilities,
    inference_ms: 12.5,
    model: { width: 1, quantized: false, total_parameters: 30_672_164 },
    ...overrides,
  };
}

export function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** fetch stub that replays a queue of responses and records every call. */
export function fetchStub(responses: (Response | Error)[]) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const next = responses.shift();
    if (!next) throw new Error("fetch stub exhausted");
    if (next instanceof Error) throw next;
    return next;
  };
  return { fn, calls };
}
