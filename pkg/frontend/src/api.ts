import { isClassName, type ClassificationResult, type ModelInfo } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Service said the body is not a decodable image (HTTP 400). */
export class UnreadableImageError extends Error {}

/** Service unreachable or answered outside its contract. */
export class ServiceError extends Error {}

function checkResult(data: unknown): ClassificationResult {
  const r = data as ClassificationResult;
  if (!r || typeof r !== "object" || !isClassName(r.label) || typeof r.probabilities !== "object") {
    throw new ServiceError("malformed classification response");
  }
  return r;
}

export async function classifyImage(
  baseUrl: string,
  body: Blob,
  contentType: string,
  fetchFn: FetchLike = fetch,
): Promise<ClassificationResult> {
  let response: Response;
  try {
    response = await fetchFn(`${baseUrl}/classify`, {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
  } catch (err) {
    throw new ServiceError(`service unreachable: ${String(err)}`);
  }
  if (response.status === 400) {
    throw new UnreadableImageError("unreadable image");
  }
  if (!response.ok) {
    throw new ServiceError(`service answered ${response.status}`);
  }
  return checkResult(await response.json());
}

export async function fetchModelInfo(baseUrl: string, fetchFn: FetchLike = fetch): Promise<ModelInfo> {
  let response: Response;
  try {
    response = await fetchFn(`${baseUrl}/model/info`);
  } catch (err) {
    throw new ServiceError(`service unreachable: ${String(err)}`);
  }
  if (!response.ok) {
    throw new ServiceError(`service answered ${response.status}`);
  }
  return (await response.json()) as ModelInfo;
}
