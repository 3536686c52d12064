import { describe, expect, it } from "vitest";

import { classifyImage, fetchModelInfo, ServiceError, UnreadableImageError } from "../src/api.js";
import { fetchStub, fixedResult, jsonResponse } from "./helpers.js";

const blob = new Blob([new Uint8Array([1, 2, 3])], { type: "image/png" });

describe("classifyImage", () => {
  it("posts the body with its content type and parses the result", async () => {
    const { fn, calls } = fetchStub([jsonResponse(200, fixedResult("fresh"))]);
    const result = await classifyImage("http://svc", blob, "image/png", fn);
    expect(result.label).toBe("fresh");
    expect(result.probabilities.fresh).toBeCloseTo(0.91);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://svc/classify");
    expect(calls[0]!.init?.method).toBe("POST");
    expect((calls[0]!.init?.headers as Record<string, string>)["Content-Type"]).toBe("image/png");
  });

  it("maps HTTP 400 to UnreadableImageError", async () => {
    const { fn } = fetchStub([jsonResponse(400, { error: "bad_image" })]);
    await expect(classifyImage("", blob, "image/png", fn)).rejects.toBeInstanceOf(UnreadableImageError);
  });

  it("maps network failure to ServiceError", async () => {
    const { fn } = fetchStub([new Error("connection refused")]);
    await expect(classifyImage("", blob, "image/png", fn)).rejects.toBeInstanceOf(ServiceError);
  });

  it("maps a 500 to ServiceError", async () => {
    const { fn } = fetchStub([jsonResponse(500, { error: "internal" })]);
    await expect(classifyImage("", blob, "image/png", fn)).rejects.toBeInstanceOf(ServiceError);
  });

  it("rejects a response without a known label", async () => {
    const { fn } = fetchStub([jsonResponse(200, { label: "banana", probabilities: {} })]);
    await expect(classifyImage("", blob, "image/png", fn)).rejects.toBeInstanceOf(ServiceError);
  });
});

describe("fetchModelInfo", () => {
  it("returns the parsed payload", async () => {
    const info = { classes: ["defect"], input_size: [256, 256, 3], width: 1, quantized: true, total_parameters: 7 };
    const { fn, calls } = fetchStub([jsonResponse(200, info)]);
    expect(await fetchModelInfo("http://svc", fn)).toEqual(info);
    expect(calls[0]!.url).toBe("http://svc/model/info");
  });

  it("wraps failures in ServiceError", async () => {
    const { fn } = fetchStub([new Error("down")]);
    await expect(fetchModelInfo("", fn)).rejects.toBeInstanceOf(ServiceError);
  });
});
