import { classifyImage, ServiceError, UnreadableImageError, type FetchLike } from "./api.js";
import { renderHistory, renderResult, renderTally } from "./render.js";
import { makeEntry, setOverride, tally } from "./session.js";
import type { ClassName, SessionEntry, SessionTally } from "./types.js";

export interface ConsoleOptions {
  baseUrl?: string;
  fetchFn?: FetchLike;
  /** Turns a submitted blob into a thumbnail URL; object URL by default. */
  thumbnailFor?: (blob: Blob) => string;
}

export interface GradingConsole {
  /** Classify one image; resolves when the entry is rendered or an error is shown. */
  submit(blob: Blob, contentType: string): Promise<void>;
  override(id: number, label: ClassName | null): void;
  retry(): Promise<void>;
  entries(): readonly SessionEntry[];
  currentTally(): SessionTally;
  pending(): boolean;
}

const SKELETON = `
  <div class="pane pane-result">
    <div id="error-banner" class="error-banner" hidden></div>
    <div id="result" class="result-empty">no classification yet</div>
  </div>
  <div class="pane pane-session">
    <h2>session tally</h2>
    <div id="tally"></div>
    <h2>entries</h2>
    <div id="history"></div>
  </div>`;

/**
 * Mounts the result/tally/history panes into root and owns the session state.
 * Input wiring (file picker, camera) lives in main.ts; tests drive submit()
 * and override() directly.
 */
export function createConsole(root: HTMLElement, opts: ConsoleOptions = {}): GradingConsole {
  const baseUrl = opts.baseUrl ?? "";
  const fetchFn = opts.fetchFn ?? fetch;
  const thumbnailFor = opts.thumbnailFor ?? ((blob: Blob) => URL.createObjectURL(blob));

  root.innerHTML = SKELETON;
  const resultEl = root.querySelector<HTMLElement>("#result")!;
  const tallyEl = root.querySelector<HTMLElement>("#tally")!;
  const historyEl = root.querySelector<HTMLElement>("#history")!;
  const bannerEl = root.querySelector<HTMLElement>("#error-banner")!;

  let entries: SessionEntry[] = [];
  let inFlight = false;
  let lastRequest: { blob: Blob; contentType: string } | null = null;

  function overrideEntry(id: number, label: ClassName | null): void {
    // tallies only; never re-request or touch the stored model result
    entries = entries.map((e) => (e.id === id ? setOverride(e, label) : e));
    refreshSession();
  }

  function refreshSession(): void {
    renderTally(tallyEl, tally(entries));
    renderHistory(historyEl, entries, overrideEntry);
  }

  function showBanner(message: string, retryable: boolean): void {
    bannerEl.hidden = false;
    bannerEl.innerHTML = "";
    bannerEl.append(message);
    if (retryable) {
      const btn = document.createElement("button");
      btn.id = "retry";
      btn.textContent = "retry";
      btn.addEventListener("click", () => void doSubmit());
      bannerEl.append(" ", btn);
    }
  }

  async function doSubmit(): Promise<void> {
    if (inFlight || !lastRequest) return;
    inFlight = true;
    root.classList.add("busy");
    bannerEl.hidden = true;
    try {
      const result = await classifyImage(baseUrl, lastRequest.blob, lastRequest.contentType, fetchFn);
      entries.push(makeEntry(result, thumbnailFor(lastRequest.blob)));
      renderResult(resultEl, result);
      resultEl.classList.remove("result-empty");
      refreshSession();
    } catch (err) {
      if (err instanceof UnreadableImageError) {
        showBanner("unreadable image", false);
      } else if (err instanceof ServiceError) {
        showBanner("service unavailable", true);
      } else {
        throw err;
      }
    } finally {
      inFlight = false;
      root.classList.remove("busy");
    }
  }

  refreshSession();

  return {
    async submit(blob: Blob, contentType: string): Promise<void> {
      if (inFlight) return; // one request at a time
      lastRequest = { blob, contentType };
      await doSubmit();
    },
    override: overrideEntry,
    retry: doSubmit,
    entries: () => entries,
    currentTally: () => tally(entries),
    pending: () => inFlight,
  };
}
