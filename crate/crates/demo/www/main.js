import init, { align_view, behind_curve, reconstruct_instance } from "./pkg/septrace_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, fn) {
  const out = $(id);
  out.classList.remove("err");
  try {
    return fn(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function alignView() {
  show("av-out", (out) => {
    const v = JSON.parse(align_view($("av-x").value, num("av-delta"), num("av-seed"), num("av-c0")));
    const lines = [
      `gaps of x      ${v.gaps.join(" ")}`,
      `trace runs     ${v.trace_gaps.join(" ")}`,
      `kept ones      ${v.kept_ones.join(" ") || "(none)"}`,
      `pointer path   ${v.path.join(" ")}${v.stalled ? "  (stalled)" : ""}`,
      `accepted (m,q) ${v.accepted.map(([m, q]) => `(${m},${q})`).join(" ") || "(none)"}`,
      `c0 log n       ${v.threshold_scale.toFixed(3)}`,
    ];
    out.textContent = lines.join("\n");
  });
}

function plot(curve) {
  const c = $("bc-plot");
  const g = c.getContext("2d");
  const [w, h, pad] = [c.width, c.height, 40];
  g.clearRect(0, 0, w, h);
  const xs = curve.map((p) => Math.log10(p.delta));
  const ys = curve.map((p) => Math.log10(Math.max(p.behind, 1e-12)));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(0, ...ys)];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  g.fillStyle = "#333";
  g.fillText("log10 delta", w / 2 - 25, h - 10);
  g.fillText("log10 P(behind)", 5, pad - 10);
  g.fillText(x0.toFixed(1), pad, h - pad + 15);
  g.fillText(x1.toFixed(1), w - pad - 15, h - pad + 15);
  g.fillText(y1.toFixed(1), 5, pad + 5);
  g.fillText(y0.toFixed(1), 5, h - pad);
  g.strokeStyle = "#c33";
  g.beginPath();
  xs.forEach((x, i) => (i ? g.lineTo(px(x), py(ys[i])) : g.moveTo(px(x), py(ys[i]))));
  g.stroke();
}

function behindCurve() {
  show("bc-out", (out) => {
    const v = JSON.parse(behind_curve($("bc-gaps").value, 60, num("bc-c0")));
    plot(v.curve);
    const rows = v.curve.filter((_, i) => i % 10 === 0 || i === v.curve.length - 1);
    out.textContent =
      `m = ${v.m}\n delta        P(behind)    P(exact)\n` +
      rows.map((p) => `${p.delta.toExponential(2)}   ${p.behind.toExponential(3)}   ${p.exact.toFixed(6)}`).join("\n");
  });
}

function reconstruct() {
  show("rc-out", (out) => {
    out.textContent = "running...";
    const v = JSON.parse(
      reconstruct_instance(num("rc-n"), num("rc-l"), num("rc-t"), num("rc-delta"), num("rc-seed"), num("rc-traces")),
    );
    out.textContent = [
      `success        ${v.success}`,
      v.error ? `error          ${v.error}` : `t estimated    ${v.t_estimated}`,
      `true gaps      ${v.gaps.join(" ")}`,
      `recovered      ${v.recovered ? v.recovered.join(" ") : "-"}`,
      `accepted/gap   ${v.accepted.join(" ")}`,
      `traces drawn   ${v.traces_drawn}`,
    ].join("\n");
  });
}

await init();
$("av-run").onclick = alignView;
$("bc-run").onclick = behindCurve;
$("rc-run").onclick = () => setTimeout(reconstruct, 0);
alignView();
behindCurve();
