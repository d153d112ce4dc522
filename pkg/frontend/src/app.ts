/**
 * The what-if explorer page: load a report from disk, adjust per-component
 * importance with sliders (Low/Moderate/High detents, free values allowed),
 * pick presets, and watch scores, bands, and the ranking recompute live.
 *
 * The page is fully static and never makes a network request; reports are
 * read with FileReader from a local file input.
 */

import {
  HIGH,
  ImportanceLevels,
  LOW,
  MODERATE,
  USE_CASE_PRESETS,
  allZero,
} from "./hem.js";
import { ReportError, ReportFile, Scored, parseReport, rescore } from "./report.js";

const COMPONENTS: Array<keyof ImportanceLevels> = [
  "accuracy",
  "convergence",
  "comp_efficiency",
  "fairness",
  "personalization",
];

const LABELS: Record<string, string> = {
  accuracy: "Accuracy",
  convergence: "Convergence",
  comp_efficiency: "Computational efficiency",
  fairness: "Fairness",
  personalization: "Personalization",
};

const BAND_COLORS: Record<string, string> = {
  Excellent: "#2d8a4e",
  Good: "#7cb342",
  Acceptable: "#f0a202",
  Low: "#d1495b",
};

interface ExplorerState {
  report: ReportFile | null;
  importance: ImportanceLevels;
}

const state: ExplorerState = {
  report: null,
  importance: { ...USE_CASE_PRESETS["institution"]! },
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.hidden = false;
  el<HTMLDivElement>("results").hidden = true;
  el<HTMLDivElement>("report-meta").textContent = "";
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").hidden = true;
}

function levelName(value: number): string {
  if (value === LOW) return "Low";
  if (value === MODERATE) return "Moderate";
  if (value === HIGH) return "High";
  return value.toFixed(2);
}

function renderSliders(): void {
  const container = el<HTMLDivElement>("sliders");
  container.replaceChildren();
  for (const component of COMPONENTS) {
    const row = document.createElement("div");
    row.className = "slider-row";

    const label = document.createElement("label");
    label.textContent = LABELS[component] ?? component;
    label.htmlFor = `slider-${component}`;

    const slider = document.createElement("input");
    slider.type = "range";
    slider.id = `slider-${component}`;
    slider.min = "0";
    slider.max = "5";
    slider.step = "0.25";
    slider.setAttribute("list", "level-detents");
    slider.value = String(state.importance[component]);

    const value = document.createElement("input");
    value.type = "number";
    value.min = "0";
    value.step = "0.05";
    value.value = String(state.importance[component]);
    value.className = "level-value";

    const name = document.createElement("span");
    name.className = "level-name";
    name.textContent = levelName(state.importance[component]);

    slider.addEventListener("input", () => {
      const level = Number(slider.value);
      state.importance[component] = level;
      value.value = slider.value;
      name.textContent = levelName(level);
      renderResults();
    });
    value.addEventListener("input", () => {
      const level = Number(value.value);
      if (!Number.isFinite(level) || level < 0) return;
      state.importance[component] = level;
      slider.value = String(Math.min(level, 5));
      name.textContent = levelName(level);
      renderResults();
    });

    row.append(label, slider, value, name);
    container.append(row);
  }
}

function renderPresets(): void {
  const container = el<HTMLDivElement>("presets");
  container.replaceChildren();
  for (const [presetName, levels] of Object.entries(USE_CASE_PRESETS)) {
    const button = document.createElement("button");
    button.textContent = presetName;
    button.addEventListener("click", () => {
      state.importance = { ...levels };
      renderSliders();
      renderResults();
    });
    container.append(button);
  }
}

function barChart(scored: Scored): SVGSVGElement {
  const svgNS = "http://www.w3.org/2000/svg";
  const rowHeight = 26;
  const labelWidth = 150;
  const chartWidth = 420;
  const height = scored.ranking.length * rowHeight + 24;
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("width", String(labelWidth + chartWidth + 60));
  svg.setAttribute("height", String(height));

  for (const threshold of [0.5, 0.7, 0.8]) {
    const x = labelWidth + threshold * chartWidth;
    const line = document.createElementNS(svgNS, "line");
    line.setAttribute("x1", String(x));
    line.setAttribute("x2", String(x));
    line.setAttribute("y1", "0");
    line.setAttribute("y2", String(height - 20));
    line.setAttribute("stroke", "#bbb");
    line.setAttribute("stroke-dasharray", "4 3");
    svg.append(line);
    const tick = document.createElementNS(svgNS, "text");
    tick.setAttribute("x", String(x));
    tick.setAttribute("y", String(height - 6));
    tick.setAttribute("text-anchor", "middle");
    tick.setAttribute("class", "tick");
    tick.textContent = threshold.toFixed(1);
    svg.append(tick);
  }

  scored.ranking.forEach((name, index) => {
    const score = scored.scores[name] as number;
    const bandName = scored.bands[name] as string;
    const y = index * rowHeight + 4;

    const label = document.createElementNS(svgNS, "text");
    label.setAttribute("x", String(labelWidth - 8));
    label.setAttribute("y", String(y + 14));
    label.setAttribute("text-anchor", "end");
    label.textContent = name;
    svg.append(label);

    const bar = document.createElementNS(svgNS, "rect");
    bar.setAttribute("x", String(labelWidth));
    bar.setAttribute("y", String(y));
    bar.setAttribute("width", String(Math.max(1, score * chartWidth)));
    bar.setAttribute("height", String(rowHeight - 8));
    bar.setAttribute("fill", BAND_COLORS[bandName] ?? "#888");
    svg.append(bar);

    const value = document.createElementNS(svgNS, "text");
    value.setAttribute("x", String(labelWidth + score * chartWidth + 6));
    value.setAttribute("y", String(y + 14));
    value.textContent = score.toFixed(3);
    svg.append(value);
  });
  return svg;
}

function renderResults(): void {
  const results = el<HTMLDivElement>("results");
  const warning = el<HTMLDivElement>("importance-warning");
  if (!state.report) {
    results.hidden = true;
    return;
  }
  if (allZero(state.importance)) {
    warning.hidden = false;
    warning.textContent =
      "All importance levels are zero: scores are undefined until at least one component has weight.";
    el<HTMLTableSectionElement>("ranking-body").replaceChildren();
    el<HTMLDivElement>("chart").replaceChildren();
    return;
  }
  warning.hidden = true;

  const scored = rescore(state.report, state.importance);
  const body = el<HTMLTableSectionElement>("ranking-body");
  body.replaceChildren();
  scored.ranking.forEach((name, index) => {
    const entry = state.report!.algorithms[name]!;
    const row = document.createElement("tr");
    const cells = [
      String(index + 1),
      name,
      (scored.scores[name] as number).toFixed(4),
      scored.bands[name] as string,
      entry.components
        ? COMPONENTS.map((c) => {
            const v = entry.components![c as keyof typeof entry.components];
            return v === null || v === undefined ? "–" : (v as number).toFixed(2);
          }).join(" / ")
        : "–",
    ];
    cells.forEach((text, i) => {
      const cell = document.createElement("td");
      cell.textContent = text;
      if (i === 3) cell.style.color = BAND_COLORS[text] ?? "inherit";
      row.append(cell);
    });
    body.append(row);
  });

  const chart = el<HTMLDivElement>("chart");
  chart.replaceChildren(barChart(scored));
  results.hidden = false;
}

function loadReportText(text: string, sourceName: string): void {
  try {
    state.report = parseReport(text);
  } catch (error) {
    state.report = null;
    showError(
      error instanceof ReportError
        ? `Could not load ${sourceName}: ${error.message}`
        : `Could not load ${sourceName}: unexpected error`,
    );
    return;
  }
  clearError();
  state.importance = { ...state.report.importance.levels };
  const meta = el<HTMLDivElement>("report-meta");
  const count = Object.keys(state.report.algorithms).length;
  meta.textContent =
    `${sourceName}: ${count} algorithms, stored importance "${state.report.importance.use_case_name}", ` +
    `config ${state.report.config_fingerprint.slice(0, 12)}`;
  renderSliders();
  renderResults();
}

export function start(): void {
  renderPresets();
  renderSliders();
  const input = el<HTMLInputElement>("report-file");
  input.addEventListener("change", () => {
    const file = input.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => loadReportText(String(reader.result), file.name);
    reader.onerror = () => showError(`Could not read ${file.name}`);
    reader.readAsText(file);
  });
}

if (typeof document !== "undefined" && document.getElementById("report-file")) {
  start();
}
