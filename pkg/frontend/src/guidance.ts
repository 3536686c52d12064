import type { ClassName } from "./types.js";

const GUIDANCE: Record<ClassName, string> = {
  defect: "remove from lot",
  immature: "hold",
  mature: "grade for sale",
  fresh: "grade for sale",
};

export function guidanceFor(label: ClassName): string {
  return GUIDANCE[label];
}
