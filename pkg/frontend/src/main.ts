// Page wiring. All state lives in one ViewState; every change funnels
// through render(). The service base URL is the single configuration
// knob: ?api=http://host:port, default local service.

import { Annotator } from "./annotate.js";
import { Api, ApiError } from "./api.js";
import { DashboardPoller, renderStatsPanel } from "./dashboard.js";
import { dismissToast, initialState } from "./state.js";
import { renderAnnotationPane, renderToasts, renderValidation } from "./view.js";

const API_BASE =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";

const api = new Api(API_BASE);
const state = initialState();
const annotator = new Annotator(api, state, render);
const poller = new DashboardPoller(api, state, render);

const el = (id: string) => document.getElementById(id) as HTMLElement;
const bufferEl = () => document.getElementById("buffer") as HTMLTextAreaElement;

function render(): void {
  el("annotation").innerHTML = renderAnnotationPane(state);
  el("validation").innerHTML = renderValidation(state);
  el("stats-panel").innerHTML = renderStatsPanel(state);
  el("toasts").innerHTML = renderToasts(state);
  const buf = bufferEl();
  if (buf.value !== state.buffer) buf.value = state.buffer;
  (el("submit") as HTMLButtonElement).disabled = state.busy;
}

function showConsole(show: boolean): void {
  el("console").style.display = show ? "" : "none";
  el("upload-panel").style.display = show ? "none" : "";
}

async function upload(): Promise<void> {
  const text = (document.getElementById("corpus-text") as HTMLTextAreaElement).value;
  if (text.trim() === "") {
    el("upload-error").textContent = "Paste corpus lines first.";
    return;
  }
  const thresholdRaw = (document.getElementById("msttr-threshold") as HTMLInputElement).value;
  const options: Parameters<typeof api.uploadCorpus>[1] = {};
  if (thresholdRaw.trim() !== "") {
    options.thresholds = { min_msttr: Number(thresholdRaw) };
  }
  try {
    const ack = await api.uploadCorpus(text, options);
    el("upload-error").textContent = "";
    showConsole(true);
    el("conn").textContent = `${API_BASE} · ${ack.corpus_size} records`;
    await annotator.loadBatch();
    poller.start();
  } catch (err) {
    el("upload-error").textContent =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  }
}

async function exportCorpus(): Promise<void> {
  try {
    const bundle = await api.exportCorpus();
    const blob = new Blob([bundle.data], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "corpus-export.txt";
    a.click();
    URL.revokeObjectURL(a.href);
  } catch (err) {
    state.toasts.push({ kind: "error", message: `Export failed: ${describe(err)}` });
    render();
  }
}

async function trainNow(): Promise<void> {
  try {
    await api.train();
    state.toasts.push({ kind: "info", message: "Training started." });
  } catch (err) {
    state.toasts.push({ kind: "error", message: `Training not started: ${describe(err)}` });
  }
  render();
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

async function init(): Promise<void> {
  el("conn").textContent = API_BASE;
  bufferEl().addEventListener("input", () => {
    state.buffer = bufferEl().value;
    if (state.validation) {
      state.validation = null;
      el("validation").innerHTML = "";
    }
  });
  bufferEl().addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && (ev.ctrlKey || ev.metaKey)) void annotator.submit();
  });
  el("submit").addEventListener("click", () => void annotator.submit());
  el("export").addEventListener("click", () => void exportCorpus());
  el("train").addEventListener("click", () => void trainNow());
  el("upload").addEventListener("click", () => void upload());
  el("toasts").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const retry = target.getAttribute("data-retry");
    const dismiss = target.getAttribute("data-dismiss");
    if (retry !== null) {
      const toast = state.toasts[Number(retry)];
      dismissToast(state, Number(retry));
      render();
      toast?.retry?.();
    } else if (dismiss !== null) {
      dismissToast(state, Number(dismiss));
      render();
    }
  });

  try {
    const health = await api.health();
    if (health.session) {
      showConsole(true);
      await annotator.loadBatch();
      poller.start();
    } else {
      showConsole(false);
    }
  } catch {
    showConsole(false);
    el("upload-error").textContent =
      `Service at ${API_BASE} is not answering — start it with: datanno serve`;
  }
}

void init();
