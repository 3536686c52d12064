import { fetchModelInfo } from "./api.js";
import { captureFrame, startCamera, stopCamera } from "./camera.js";
import { createConsole } from "./console.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

async function boot(): Promise<void> {
  const grading = createConsole(el("app"));

  const fileInput = el<HTMLInputElement>("file-input");
  const submitBtn = el<HTMLButtonElement>("submit");
  const preview = el<HTMLImageElement>("preview");
  const inputNotice = el("input-notice");
  const cameraBtn = el<HTMLButtonElement>("camera-toggle");
  const captureBtn = el<HTMLButtonElement>("capture");
  const video = el<HTMLVideoElement>("camera");

  let pendingBlob: Blob | null = null;
  let pendingType = "image/png";

  function stage(blob: Blob, contentType: string): void {
    pendingBlob = blob;
    pendingType = contentType;
    preview.src = URL.createObjectURL(blob);
    preview.hidden = false;
    submitBtn.disabled = false;
    inputNotice.textContent = "";
  }

  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    if (file.type !== "image/png" && file.type !== "image/jpeg") {
      // rejected client-side; nothing is sent
      inputNotice.textContent = `not a PNG or JPEG: ${file.name}`;
      fileInput.value = "";
      return;
    }
    stage(file, file.type);
  });

  submitBtn.addEventListener("click", async () => {
    if (!pendingBlob) return;
    submitBtn.disabled = true;
    try {
      await grading.submit(pendingBlob, pendingType);
    } finally {
      submitBtn.disabled = false;
    }
  });

  let cameraOn = false;
  cameraBtn.addEventListener("click", async () => {
    if (cameraOn) {
      stopCamera(video);
      cameraOn = false;
      video.hidden = true;
      captureBtn.hidden = true;
      cameraBtn.textContent = "use camera";
      return;
    }
    cameraBtn.disabled = true;
    cameraOn = await startCamera(video);
    // stays disabled on denial: upload-only mode
    cameraBtn.disabled = !cameraOn;
    if (!cameraOn) {
      inputNotice.textContent = "camera unavailable; use the file picker";
      return;
    }
    video.hidden = false;
    captureBtn.hidden = false;
    cameraBtn.textContent = "stop camera";
  });

  captureBtn.addEventListener("click", async () => {
    const blob = await captureFrame(video);
    if (blob) stage(blob, "image/png");
  });

  try {
    const info = await fetchModelInfo("");
    el("model-info").textContent =
      `${info.quantized ? "int8" : "float32"} model, width ${info.width}, ` +
      `${info.total_parameters.toLocaleString()} parameters`;
  } catch {
    el("model-info").textContent = "service not reachable";
  }
}

window.addEventListener("load", () => void boot());
