export type GetUserMedia = (constraints: MediaStreamConstraints) => Promise<MediaStream>;

export function defaultGetUserMedia(): GetUserMedia | undefined {
  const devices = typeof navigator !== "undefined" ? navigator.mediaDevices : undefined;
  return devices?.getUserMedia ? devices.getUserMedia.bind(devices) : undefined;
}

/**
 * Attach the rear camera to the video element. false means the camera is not
 * available (no API or permission denied) and the console stays upload-only.
 */
export async function startCamera(
  video: HTMLVideoElement,
  getUserMedia: GetUserMedia | undefined = defaultGetUserMedia(),
): Promise<boolean> {
  if (!getUserMedia) return false;
  try {
    const stream = await getUserMedia({ video: { facingMode: "environment" } });
    video.srcObject = stream;
    await video.play();
    return true;
  } catch {
    return false;
  }
}

export function stopCamera(video: HTMLVideoElement): void {
  const stream = video.srcObject as MediaStream | null;
  stream?.getTracks().forEach((t) => t.stop());
  video.srcObject = null;
}

/** Grab the current video frame as a PNG blob. */
export function captureFrame(video: HTMLVideoElement): Promise<Blob | null> {
  const canvas = document.createElement("canvas");
  canvas.width = video.videoWidth || 256;
  canvas.height = video.videoHeight || 256;
  const ctx = canvas.getContext("2d");
  if (!ctx) return Promise.resolve(null);
  ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
  return new Promise((resolve) => canvas.toBlob(resolve, "image/png"));
}
