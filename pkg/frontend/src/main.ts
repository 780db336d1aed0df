import { ApiClient } from "./api.js";
import { ReviewSession } from "./session.js";
import { ToastRack } from "./toast.js";
import {
  candidateTooltip,
  paintOverlay,
  pickBox,
  pickCandidate,
  planOverlay,
} from "./overlay.js";
import type { DrawOp } from "./overlay.js";
import {
  boxStatus,
  fitView,
  initialState,
  panBy,
  reconcileSelection,
  selectBox,
  zoomAt,
} from "./state.js";
import type { ViewState } from "./state.js";
import { FLAG_NAMES } from "./types.js";
import type { Action, Candidate, ReviewDecision } from "./types.js";

const api = new ApiClient("");
const session = new ReviewSession(api);
const toasts = new ToastRack(el("toasts"));

let state: ViewState = initialState();
let currentImage: HTMLImageElement | null = null;
let currentPlan: DrawOp[] = [];
let selectedMmsi: number | null = null;
let online = true;

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const viewport = el("viewport");
const imageCanvas = el<HTMLCanvasElement>("image-canvas");
const overlayCanvas = el<HTMLCanvasElement>("overlay-canvas");
const tooltip = el("tooltip");
const granuleSelect = el<HTMLSelectElement>("granule-select");
const bandSelect = el<HTMLSelectElement>("band-select");
const loInput = el<HTMLInputElement>("lo-input");
const hiInput = el<HTMLInputElement>("hi-input");
const reviewerInput = el<HTMLInputElement>("reviewer-input");
const connBadge = el<HTMLButtonElement>("conn-badge");
const boxInfo = el("box-info");
const candidateList = el<HTMLOListElement>("candidate-list");
const btnAccept = el<HTMLButtonElement>("btn-accept");
const btnReject = el<HTMLButtonElement>("btn-reject");
const btnReassign = el<HTMLButtonElement>("btn-reassign");

// ------------------------------------------------------------------ drawing

function resizeCanvases() {
  const w = viewport.clientWidth;
  const h = viewport.clientHeight;
  for (const canvas of [imageCanvas, overlayCanvas]) {
    if (canvas.width !== w || canvas.height !== h) {
      canvas.width = w;
      canvas.height = h;
    }
  }
}

function drawAll() {
  resizeCanvases();
  const w = overlayCanvas.width;
  const h = overlayCanvas.height;

  const ictx = imageCanvas.getContext("2d")!;
  ictx.clearRect(0, 0, w, h);
  if (currentImage) {
    ictx.imageSmoothingEnabled = state.zoom < 4;
    ictx.drawImage(currentImage, state.panX, state.panY,
                   currentImage.width * state.zoom,
                   currentImage.height * state.zoom);
  }

  currentPlan = planOverlay(session.annotations, session.candidates, state,
                            session.queue.pending);
  const octx = overlayCanvas.getContext("2d")!;
  paintOverlay(octx, currentPlan, state, w, h);
}

// Band tiles swap in only once decoded; a failed fetch keeps the last
// good image on screen and reports through a toast instead.
function loadBand() {
  if (!state.granuleId || !state.bandId) return;
  const url = api.bandPngUrl(state.granuleId, state.bandId,
                             Number(loInput.value), Number(hiInput.value));
  const img = new Image();
  img.onload = () => {
    currentImage = img;
    drawAll();
  };
  img.onerror = () => {
    toasts.error(`band ${state.bandId} failed to load; keeping previous view`);
  };
  img.src = url;
}

// ------------------------------------------------------------------ sidebar

function describeBox(boxId: number): string {
  const ann = session.annotation(boxId);
  if (!ann) return "box not in the loaded set";
  const attrs = ann.attributes || {};
  const display = boxStatus(ann, session.queue.pending);
  const lines = [
    `box ${ann.id}`,
    `bbox [${ann.bbox.map((v) => Math.round(v * 10) / 10).join(", ")}]`,
    `status ${display.status}${display.pending ? " (pending sync)" : ""}`,
  ];
  if (typeof attrs.mmsi === "number") lines.push(`mmsi ${attrs.mmsi}`);
  if (attrs.ship_type) lines.push(`ship type ${attrs.ship_type}`);
  if (attrs.flags && attrs.flags.length) {
    lines.push(`flags ${attrs.flags
      .map((f) => FLAG_NAMES[f] || String(f)).join(", ")}`);
  }
  if (attrs.review) {
    lines.push(`reviewed by ${attrs.review.reviewer} (${attrs.review.status})`);
  }
  return lines.join("\n");
}

function renderCandidateList() {
  candidateList.textContent = "";
  selectedMmsi = null;
  const boxId = state.selectedBox;
  if (boxId === null) return;
  // exactly the server's rows, in the server's order
  for (const cand of session.candidatesFor(boxId)) {
    const li = document.createElement("li");
    const label = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = "cand";
    radio.value = String(cand.mmsi);
    radio.addEventListener("change", () => {
      selectedMmsi = cand.mmsi;
      updateButtons();
    });
    label.appendChild(radio);
    label.appendChild(document.createTextNode(` ${cand.mmsi}`));
    const costs = document.createElement("span");
    costs.className = "cand-costs";
    costs.textContent = cand.cost === null
      ? "beyond cutoff"
      : `cost ${cand.cost.toFixed(1)} m · d_perp ${cand.d_perp.toFixed(1)}` +
        ` · d_eucl ${cand.d_eucl.toFixed(1)} · w_nav ${cand.w_nav}`;
    label.appendChild(costs);
    li.appendChild(label);
    candidateList.appendChild(li);
  }
}

function updateButtons() {
  const haveBox = state.selectedBox !== null;
  btnAccept.disabled = !haveBox;
  btnReject.disabled = !haveBox;
  btnReassign.disabled = !haveBox || selectedMmsi === null;
}

function refreshSidebar() {
  boxInfo.textContent = state.selectedBox === null
    ? "click a box in the viewport"
    : describeBox(state.selectedBox);
  renderCandidateList();
  updateButtons();
}

function updateConnBadge() {
  const queued = session.queue.size;
  connBadge.classList.toggle("offline", !online);
  connBadge.textContent = online
    ? (queued ? `online · ${queued} queued` : "online")
    : (queued ? `offline · ${queued} queued` : "offline");
}

// ------------------------------------------------------------------ actions

function buildDecision(action: Action): ReviewDecision | null {
  if (state.selectedBox === null || state.granuleId === null) return null;
  const reviewer = reviewerInput.value.trim();
  if (!reviewer) {
    toasts.error("enter a reviewer name first");
    return null;
  }
  const decision: ReviewDecision = {
    granule_id: state.granuleId,
    box_id: state.selectedBox,
    action,
    reviewer,
    decided_at: new Date().toISOString(),
  };
  if (action === "reassign") {
    if (selectedMmsi === null) return null;
    decision.mmsi = selectedMmsi;
  }
  return decision;
}

async function submit(action: Action) {
  const decision = buildDecision(action);
  if (!decision) return;
  try {
    const result = await session.submit(decision);
    if (result.state === "applied") {
      toasts.info(`box ${decision.box_id}: ${action} applied`);
    } else if (result.state === "conflict") {
      const existing = result.outcome.outcome === "conflict"
        ? result.outcome.existing : null;
      toasts.error(existing
        ? `box ${decision.box_id} was already ${existing.status} by ` +
          `${existing.reviewer}; showing server state`
        : `box ${decision.box_id} already decided; showing server state`);
      state = reconcileSelection(state, session.annotations);
    } else if (result.state === "queued") {
      online = false;
      toasts.info(`server unreachable; ${action} queued ` +
                  `(${session.queue.size} pending)`);
    } else if (result.state === "error") {
      toasts.error(result.error);
    }
  } catch (err) {
    toasts.error(String(err instanceof Error ? err.message : err));
  }
  updateConnBadge();
  refreshSidebar();
  drawAll();
}

async function flushQueue() {
  if (session.queue.size === 0) return;
  const results = await session.flushQueue();
  let sent = 0;
  for (const result of results) {
    if (result.state === "applied") sent += 1;
    else if (result.state === "conflict") {
      toasts.error(`box ${result.decision.box_id} was decided elsewhere ` +
                   `while offline; showing server state`);
    } else if (result.state === "error") {
      toasts.error(`box ${result.decision.box_id}: ${result.error}`);
    }
  }
  if (sent > 0) {
    online = true;
    toasts.info(`synced ${sent} queued decision${sent === 1 ? "" : "s"}`);
  } else if (session.queue.size > 0) {
    toasts.error(`server still unreachable; ${session.queue.size} queued`);
  }
  state = reconcileSelection(state, session.annotations);
  updateConnBadge();
  refreshSidebar();
  drawAll();
}

// ------------------------------------------------------------------ loading

async function openGranule(gid: string) {
  try {
    await session.loadGranule(gid);
  } catch (err) {
    toasts.error(`granule ${gid}: ${String(err instanceof Error ? err.message : err)}`);
    return;
  }
  const row = session.granules.find((g) => g.id === gid);
  state = { ...state, granuleId: gid };
  state = reconcileSelection(state, session.annotations);

  bandSelect.textContent = "";
  for (const band of row?.bands || []) {
    const opt = document.createElement("option");
    opt.value = band;
    opt.textContent = band;
    bandSelect.appendChild(opt);
  }
  if (row && row.bands.length) {
    state.bandId = row.bands.includes(state.bandId || "")
      ? state.bandId : row.bands[0];
    bandSelect.value = state.bandId!;
  }
  if (row) {
    state = fitView(state, row.width, row.height,
                    viewport.clientWidth, viewport.clientHeight);
  }
  loadBand();
  refreshSidebar();
  drawAll();
}

async function boot() {
  resizeCanvases();
  const granules = await session.loadGranules();
  granuleSelect.textContent = "";
  for (const g of granules) {
    const opt = document.createElement("option");
    opt.value = g.id;
    opt.textContent = `${g.id} (${g.n_annotations})`;
    granuleSelect.appendChild(opt);
  }
  if (granules.length) {
    await openGranule(granules[0].id);
  } else {
    toasts.info("store has no granules");
  }
}

// ------------------------------------------------------------------ events

granuleSelect.addEventListener("change", () => {
  void openGranule(granuleSelect.value);
});

// the caching contract: a band change re-requests the PNG and nothing else
bandSelect.addEventListener("change", () => {
  state = { ...state, bandId: bandSelect.value };
  loadBand();
});

loInput.addEventListener("change", loadBand);
hiInput.addEventListener("change", loadBand);

for (const [id, key] of [
  ["toggle-boxes", "boxes"],
  ["toggle-ais", "aisPoints"],
  ["toggle-tracks", "trackLines"],
  ["toggle-flags", "flags"],
] as const) {
  el<HTMLInputElement>(id).addEventListener("change", (e) => {
    const toggles = { ...state.toggles };
    toggles[key] = (e.target as HTMLInputElement).checked;
    state = { ...state, toggles };
    drawAll();
  });
}

btnAccept.addEventListener("click", () => void submit("accept"));
btnReject.addEventListener("click", () => void submit("reject"));
btnReassign.addEventListener("click", () => void submit("reassign"));

connBadge.addEventListener("click", () => void flushQueue());
window.addEventListener("online", () => void flushQueue());
window.addEventListener("offline", () => {
  online = false;
  updateConnBadge();
});

let dragging = false;
let moved = false;
let lastX = 0;
let lastY = 0;

overlayCanvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  moved = false;
  lastX = e.offsetX;
  lastY = e.offsetY;
  overlayCanvas.setPointerCapture(e.pointerId);
});

overlayCanvas.addEventListener("pointermove", (e) => {
  if (dragging) {
    const dx = e.offsetX - lastX;
    const dy = e.offsetY - lastY;
    if (Math.abs(dx) + Math.abs(dy) > 3) moved = true;
    if (moved) {
      state = panBy(state, dx, dy);
      lastX = e.offsetX;
      lastY = e.offsetY;
      drawAll();
    }
    return;
  }
  const mmsi = pickCandidate(currentPlan, state, e.offsetX, e.offsetY);
  if (mmsi !== null) {
    tooltip.textContent =
      candidateTooltip(session.candidates, state.selectedBox, mmsi).join("\n");
    tooltip.style.left = `${e.offsetX + 14}px`;
    tooltip.style.top = `${e.offsetY + 14}px`;
    tooltip.hidden = false;
  } else {
    tooltip.hidden = true;
  }
});

overlayCanvas.addEventListener("pointerup", (e) => {
  overlayCanvas.releasePointerCapture(e.pointerId);
  if (dragging && !moved) {
    const hit = pickBox(session.annotations, state, e.offsetX, e.offsetY);
    state = selectBox(state, session.annotations, hit);
    refreshSidebar();
    drawAll();
  }
  dragging = false;
});

overlayCanvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  state = zoomAt(state, e.offsetX, e.offsetY, e.deltaY < 0 ? 1.25 : 0.8);
  drawAll();
}, { passive: false });

window.addEventListener("resize", drawAll);

boot().catch((err) => {
  toasts.error(`failed to reach the review server: ${err}`);
  console.error(err);
});
