// Pure rendering: UiSessionModel in, detached DOM tree out. No globals, no
// event wiring here (controls.ts binds behavior onto the rendered tree), so
// the whole screen is testable headlessly under jsdom.

import { UiSessionModel } from "./model.js";
import { GESTURE_CLASS_NAMES } from "./protocol.js";

const SVG_NS = "http://www.w3.org/2000/svg";

// Point-cloud viewport in meters: x right, y away from the radar.
const PC_X_RANGE = 1.5;
const PC_Y_RANGE = 1.6;
const PC_WIDTH = 420;
const PC_HEIGHT = 300;

// Full-scale reading of the guide velocity gauge, m/s.
const GAUGE_FULL_SCALE = 0.15;

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(doc: Document, tag: string, attrs: Record<string, string | number>): Element {
  const node = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function dopplerColor(doppler: number): string {
  // Approaching (positive) shades red, receding shades blue.
  const intensity = Math.min(Math.abs(doppler) / 1.5, 1.0);
  const strength = Math.round(140 + 115 * intensity);
  return doppler >= 0 ? `rgb(${strength},60,60)` : `rgb(60,80,${strength})`;
}

function renderStatusBar(doc: Document, model: UiSessionModel): HTMLElement {
  const bar = el(doc, "header", "status-bar");
  bar.appendChild(el(doc, "span", `conn conn-${model.connection}`, model.connection));
  bar.appendChild(el(doc, "span", "role", model.role ?? "no session"));
  bar.appendChild(el(doc, "span", "preset", model.preset ?? "-"));
  const estopped = model.robotState !== null
    && (model.robotState.estopped || model.robotState.speed_scale === 0);
  if (estopped) {
    bar.appendChild(el(doc, "div", "estop-banner", "EMERGENCY STOP - robot halted"));
  }
  return bar;
}

function renderPointCloud(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel point-cloud");
  panel.appendChild(el(doc, "h2", undefined, "Point cloud"));
  const svg = svgEl(doc, "svg", {
    class: "pc-canvas", width: PC_WIDTH, height: PC_HEIGHT,
    viewBox: `0 0 ${PC_WIDTH} ${PC_HEIGHT}`,
  });
  // Radar origin marker at bottom center.
  svg.appendChild(svgEl(doc, "rect", {
    x: PC_WIDTH / 2 - 5, y: PC_HEIGHT - 8, width: 10, height: 8, class: "pc-radar",
  }));
  if (model.pointCloud) {
    for (const row of model.pointCloud.detections) {
      const [peak, , doppler, x, y] = row as [number, number, number, number, number];
      const px = (x / PC_X_RANGE + 1) * 0.5 * PC_WIDTH;
      const py = PC_HEIGHT - (y / PC_Y_RANGE) * PC_HEIGHT;
      const radius = 2 + Math.min(Math.log1p(Math.max(peak, 0)) / 8, 1) * 4;
      const glyph = svgEl(doc, "circle", {
        class: "pc-glyph", cx: px, cy: py, r: radius,
        fill: dopplerColor(doppler),
      });
      svg.appendChild(glyph);
    }
    panel.appendChild(el(doc, "div", "pc-count",
      `${model.pointCloud.detections.length} detections (frame ${model.pointCloud.frame_index})`));
  } else {
    panel.appendChild(el(doc, "div", "pc-count", "no frames yet"));
  }
  panel.appendChild(svg);
  return panel;
}

function project(points: number[][], pick: (p: number[]) => [number, number],
                 width: number, height: number, scale: number,
                 cx: number, cy: number): string {
  return points
    .map((p) => {
      const [a, b] = pick(p);
      return `${cx + a * scale},${cy - b * scale}`;
    })
    .join(" ");
}

function renderArm(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel arm-schematic");
  panel.appendChild(el(doc, "h2", undefined, "Arm"));
  const width = 220;
  const height = 220;
  const views: Array<[string, (p: number[]) => [number, number]]> = [
    ["top (x-y)", (p) => [p[0] ?? 0, p[1] ?? 0]],
    ["side (x-z)", (p) => [p[0] ?? 0, p[2] ?? 0]],
  ];
  for (const [label, pick] of views) {
    const svg = svgEl(doc, "svg", {
      class: "arm-view", width, height, viewBox: `0 0 ${width} ${height}`,
    });
    const points = model.robotState?.joint_points;
    if (points && points.length > 0) {
      svg.appendChild(svgEl(doc, "polyline", {
        class: "arm-links",
        points: project(points, pick, width, height, 90, width / 2 - 40, height / 2 + 40),
        fill: "none", stroke: "#333", "stroke-width": 3,
      }));
      for (const p of points) {
        const [a, b] = pick(p);
        svg.appendChild(svgEl(doc, "circle", {
          class: "arm-joint", cx: width / 2 - 40 + a * 90, cy: height / 2 + 40 - b * 90, r: 4,
        }));
      }
    }
    const wrap = el(doc, "figure", "arm-wrap");
    wrap.appendChild(svg);
    wrap.appendChild(el(doc, "figcaption", undefined, label));
    panel.appendChild(wrap);
  }
  if (model.robotState) {
    const s = model.robotState;
    panel.appendChild(el(doc, "div", "arm-readout",
      `guide ${s.guide_pos.toFixed(3)} m | gripper ${(s.gripper * 100).toFixed(0)}% | `
      + `speed ${(s.speed_scale * 100).toFixed(0)}%`));
  }
  return panel;
}

function renderBtStatus(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel bt-status");
  panel.appendChild(el(doc, "h2", undefined, "Behavior tree"));
  if (model.btStatus) {
    const { tree_id, node_path, status } = model.btStatus;
    const crumb = el(doc, "div", `bt-breadcrumb bt-${status}`);
    crumb.appendChild(el(doc, "span", "bt-tree", tree_id));
    crumb.appendChild(el(doc, "span", "bt-path", node_path));
    crumb.appendChild(el(doc, "span", "bt-state", status));
    panel.appendChild(crumb);
  } else {
    panel.appendChild(el(doc, "div", "bt-breadcrumb bt-idle", "idle"));
  }
  return panel;
}

function renderGestureFeed(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel gesture-feed");
  panel.appendChild(el(doc, "h2", undefined, "Gestures"));
  const list = el(doc, "ol", "feed-list");
  for (const entry of [...model.events].reverse()) {
    const row = el(doc, "li", "feed-row");
    row.appendChild(el(doc, "span", "feed-class", entry.class_name));
    const bar = el(doc, "span", "confidence-bar");
    const fill = el(doc, "span", "confidence-fill");
    fill.style.width = `${Math.round(entry.confidence * 100)}%`;
    bar.appendChild(fill);
    row.appendChild(bar);
    row.appendChild(el(doc, "span", "feed-conf", `${Math.round(entry.confidence * 100)}%`));
    if (entry.injected) row.appendChild(el(doc, "span", "feed-injected", "injected"));
    list.appendChild(row);
  }
  panel.appendChild(list);
  return panel;
}

function renderGuideGauge(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel guide-gauge");
  panel.appendChild(el(doc, "h2", undefined, "Guide velocity"));
  const v = model.robotState?.guide_velocity ?? 0;
  const gauge = el(doc, "div", "gauge");
  const fill = el(doc, "div", `gauge-fill ${v >= 0 ? "gauge-right" : "gauge-left"}`);
  fill.style.width = `${Math.min(Math.abs(v) / GAUGE_FULL_SCALE, 1) * 50}%`;
  fill.style[v >= 0 ? "left" : "right"] = "50%";
  gauge.appendChild(fill);
  panel.appendChild(gauge);
  panel.appendChild(el(doc, "div", "gauge-value", `${v.toFixed(4)} m/s`));
  return panel;
}

function renderControls(doc: Document, model: UiSessionModel): HTMLElement {
  const panel = el(doc, "section", "panel controls");
  panel.appendChild(el(doc, "h2", undefined, "Controls"));

  const estop = el(doc, "button", "estop-button", "EMERGENCY STOP");
  estop.setAttribute("data-command", "estop");
  panel.appendChild(estop);
  const release = el(doc, "button", "release-button", "release estop");
  release.setAttribute("data-command", "release_estop");
  panel.appendChild(release);

  const gestures = el(doc, "div", "gesture-buttons");
  for (const name of GESTURE_CLASS_NAMES) {
    const button = el(doc, "button", "gesture-button", name);
    button.setAttribute("data-gesture", name);
    gestures.appendChild(button);
  }
  panel.appendChild(gestures);

  const guide = el(doc, "div", "guide-buttons");
  const leftHold = el(doc, "button", "guide-hold", "guide left (hold)");
  leftHold.setAttribute("data-guide", "swipe_left");
  const rightHold = el(doc, "button", "guide-hold", "guide right (hold)");
  rightHold.setAttribute("data-guide", "swipe_right");
  guide.appendChild(leftHold);
  guide.appendChild(rightHold);
  panel.appendChild(guide);

  const proximity = el(doc, "label", "proximity-control", "human distance ");
  const slider = doc.createElement("input");
  slider.type = "range";
  slider.min = "0.1";
  slider.max = "3.0";
  slider.step = "0.05";
  slider.value = String(model.proximity);
  slider.className = "proximity-slider";
  proximity.appendChild(slider);
  proximity.appendChild(el(doc, "span", "proximity-value", `${model.proximity.toFixed(2)} m`));
  panel.appendChild(proximity);

  const presets = doc.createElement("select");
  presets.className = "preset-select";
  for (const preset of ["test1", "test3", "test4", "test5"]) {
    const option = doc.createElement("option");
    option.value = preset;
    option.textContent = preset;
    if (model.preset?.startsWith(preset)) option.selected = true;
    presets.appendChild(option);
  }
  panel.appendChild(presets);
  return panel;
}

function renderFooter(doc: Document, model: UiSessionModel): HTMLElement {
  const footer = el(doc, "footer", "metrics-footer");
  const m = model.metrics;
  footer.appendChild(el(doc, "span", "metric-fps", m ? `${m.fps.toFixed(1)} fps` : "- fps"));
  footer.appendChild(el(doc, "span", "metric-latency",
    m ? `${m.latency_ms.toFixed(1)} ms gesture latency` : "- ms"));
  footer.appendChild(el(doc, "span", "metric-malformed",
    `${model.malformedCount} malformed messages skipped`));
  return footer;
}

/** Full-screen render: one detached tree per model snapshot. */
export function renderViews(model: UiSessionModel, doc: Document): HTMLElement {
  const root = el(doc, "div", "operator-dashboard");
  root.appendChild(renderStatusBar(doc, model));
  const main = el(doc, "main", "dashboard-grid");
  main.appendChild(renderPointCloud(doc, model));
  main.appendChild(renderArm(doc, model));
  main.appendChild(renderBtStatus(doc, model));
  main.appendChild(renderGestureFeed(doc, model));
  main.appendChild(renderGuideGauge(doc, model));
  main.appendChild(renderControls(doc, model));
  root.appendChild(main);
  root.appendChild(renderFooter(doc, model));
  return root;
}
