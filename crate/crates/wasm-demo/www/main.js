import init, { dpc_point, fading_curve, demo_cd_curve } from "./pkg/isac_cd_demo.js";

const $ = (id) => document.getElementById(id);

function drawAxes(ctx, w, h, pad, xLabel, yLabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(pad, 10);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - 10, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#667";
  ctx.font = "12px system-ui";
  ctx.fillText(xLabel, w / 2 - 20, h - 8);
  ctx.save();
  ctx.translate(12, h / 2 + 20);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(yLabel, 0, 0);
  ctx.restore();
}

function plotCurve(canvas, pts, xLabel, yLabel, infeasibleUpTo) {
  const ctx = canvas.getContext("2d");
  const [w, h, pad] = [canvas.width, canvas.height, 46];
  drawAxes(ctx, w, h, pad, xLabel, yLabel);
  if (pts.length === 0) return;
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-9);
  const X = (x) => pad + ((x - xMin) / (xMax - xMin || 1)) * (w - pad - 20);
  const Y = (y) => h - pad - (y / (yMax * 1.1)) * (h - pad - 20);

  if (infeasibleUpTo !== null && infeasibleUpTo > xMin) {
    ctx.fillStyle = "rgba(179, 69, 30, 0.08)";
    ctx.fillRect(pad, 10, X(Math.min(infeasibleUpTo, xMax)) - pad, h - pad - 10);
  }
  ctx.strokeStyle = "#0b66c3";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
  ctx.stroke();
  ctx.fillStyle = "#0b66c3";
  for (const [x, y] of pts) {
    ctx.beginPath();
    ctx.arc(X(x), Y(y), 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
  // tick labels
  ctx.fillStyle = "#667";
  ctx.fillText(xMin.toFixed(2), pad - 8, h - pad + 14);
  ctx.fillText(xMax.toFixed(2), w - 44, h - pad + 14);
  ctx.fillText(yMax.toFixed(3), pad + 4, 18);
}

function val(id) { return parseFloat($(id).value); }
function show(id, v) { $(id).textContent = v; }

// --- panel 1: dirty paper -------------------------------------------------

function updateDpc() {
  for (const k of ["px", "sigma", "sigmaz", "sigmae", "sigmas"]) {
    show(`dpc-${k}-out`, val(`dpc-${k}`).toFixed(2));
  }
  const r = JSON.parse(
    dpc_point(val("dpc-px"), val("dpc-sigma"), val("dpc-sigmaz"), val("dpc-sigmae"), val("dpc-sigmas"))
  );
  if (r.error) {
    show("dpc-err", r.error);
    return;
  }
  show("dpc-err", "");
  show("dpc-rate", `${r.rate_bits.toFixed(4)} bits (${r.rate_nats.toFixed(4)} nats)`);
  show("dpc-dist", r.distortion.toFixed(5));
  show("dpc-coeffs", `${r.coeff_z.toFixed(4)}, ${r.coeff_x.toFixed(4)}, ${r.coeff_se.toFixed(4)}`);

  // rate and distortion as the encoder CSI degrades, at current settings
  const pts = [];
  for (let i = 0; i <= 60; i++) {
    const se = 0.05 + (i / 60) * 3.95;
    const q = JSON.parse(
      dpc_point(val("dpc-px"), val("dpc-sigma"), val("dpc-sigmaz"), se, val("dpc-sigmas"))
    );
    if (!q.error) pts.push([q.distortion, q.rate_bits]);
  }
  pts.sort((a, b) => a[0] - b[0]);
  plotCurve($("dpc-canvas"), pts, "distortion (sweep over sigma_e)", "rate, bits", null);
}

// --- panel 2: fading ------------------------------------------------------

function updateFading() {
  for (const k of ["px", "sigma", "sigmaz", "sigmas"]) {
    show(`fad-${k}-out`, val(`fad-${k}`).toFixed(2));
  }
  const ss = val("fad-sigmas");
  const r = JSON.parse(
    fading_curve(val("fad-px"), val("fad-sigma"), val("fad-sigmaz"), ss, 0.02 * ss, 1.15 * ss, 60)
  );
  if (r.error) {
    show("fad-err", r.error);
    return;
  }
  show("fad-err", "");
  show("fad-dmin", r.d_min.toFixed(4));
  const pts = r.points.filter((p) => p.feasible).map((p) => [p.d, p.c_bits]);
  plotCurve($("fad-canvas"), pts, "distortion budget D", "C(D), bits", r.d_min);
}

// --- panel 3: discrete demo model ------------------------------------------

function updateDemo() {
  show("demo-grid-out", val("demo-grid"));
  show("demo-pts-out", val("demo-pts"));
  const r = JSON.parse(demo_cd_curve(0.05, 0.16, val("demo-pts"), val("demo-grid")));
  if (r.error) {
    show("demo-err", r.error);
    return;
  }
  show("demo-err", "");
  show("demo-cmax", `${r.unconstrained_bits.toFixed(4)} bits`);
  show("demo-dmin", r.min_distortion.toFixed(4));
  const pts = r.points.map((p) => [p.d, p.c_bits]);
  plotCurve($("demo-canvas"), pts, "distortion budget D", "C(D), bits", r.min_distortion);
}

async function main() {
  await init();
  const wire = (ids, fn) => {
    for (const id of ids) $(id).addEventListener("input", fn);
    fn();
  };
  wire(["dpc-px", "dpc-sigma", "dpc-sigmaz", "dpc-sigmae", "dpc-sigmas"], updateDpc);
  wire(["fad-px", "fad-sigma", "fad-sigmaz", "fad-sigmas"], updateFading);
  wire(["demo-grid", "demo-pts"], updateDemo);
}

main();
