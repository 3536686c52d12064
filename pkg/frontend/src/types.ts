export const CLASS_NAMES = ["defect", "fresh", "immature", "mature"] as const;

export type ClassName = (typeof CLASS_NAMES)[number];

export function isClassName(value: string): value is ClassName {
  return (CLASS_NAMES as readonly string[]).includes(value);
}

/** Shape of a successful POST /classify response. */
export interface ClassificationResult {
  label: ClassName;
  probabilities: Record<ClassName, number>;
  inference_ms: number;
  model: {
    width: number;
    quantized: boolean;
    total_parameters: number;
  };
}

export interface ModelInfo {
  classes: string[];
  input_size: number[];
  width: number;
  quantized: boolean;
  total_parameters: number;
}

export interface SessionEntry {
  id: number;
  thumbnail: string; // object URL or data URL for the submitted image
  result: ClassificationResult;
  timestamp: number;
  override: ClassName | null;
}

export interface SessionTally {
  counts: Record<ClassName, number>;
  total: number;
  defectivePercent: number; // 0..100, 0 for an empty session
}
