import init, { spectrum, errorByQ, softmaxBound } from "./pkg/rsi_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = $("status");

function spec(length) {
  return JSON.stringify({
    profile: {
      kind: "knee",
      head_count: num("head"),
      head_decay_rate: num("decay"),
      tail_exponent: num("tail"),
    },
    length,
  });
}

function plot(canvas, ys, { log = false, x0 = 1, floor = null } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const f = log ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const vals = ys.map(f);
  if (floor !== null) vals.push(f(floor));
  let lo = Math.min(...vals), hi = Math.max(...vals);
  if (hi === lo) { hi += 1; lo -= 1; }
  const px = (i) => pad + (i / Math.max(ys.length - 1, 1)) * (w - 2 * pad);
  const py = (v) => h - pad - ((f(v) - lo) / (hi - lo)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText((log ? "1e" + hi.toFixed(1) : hi.toFixed(3)), 2, pad + 4);
  ctx.fillText((log ? "1e" + lo.toFixed(1) : lo.toFixed(3)), 2, h - pad);
  ctx.fillText(String(x0), pad, h - pad + 14);
  ctx.fillText(String(x0 + ys.length - 1), w - pad - 10, h - pad + 14);

  if (floor !== null) {
    ctx.strokeStyle = "#c33";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(pad, py(floor));
    ctx.lineTo(w - pad, py(floor));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.strokeStyle = "#1a5fb4";
  ctx.beginPath();
  ys.forEach((y, i) => (i ? ctx.lineTo(px(i), py(y)) : ctx.moveTo(px(i), py(y))));
  ctx.stroke();
  ys.forEach((y, i) => ctx.fillRect(px(i) - 2, py(y) - 2, 4, 4));
}

function guarded(fn) {
  return () => {
    status.textContent = "";
    status.className = "";
    try {
      fn();
    } catch (e) {
      status.textContent = String(e.message ?? e);
      status.className = "err";
    }
  };
}

function drawSpectrum() {
  plot($("spectrum-plot"), Array.from(spectrum(spec(num("len")))), { log: true });
}

function runSweep() {
  const rows = num("rows"), cols = num("cols");
  const t0 = performance.now();
  const means = Array.from(
    errorByQ(spec(Math.min(rows, cols)), rows, cols, num("rank"), num("maxq"), num("trials"), num("seed")),
  );
  const ms = performance.now() - t0;
  plot($("sweep-plot"), means, { floor: 1 });
  $("sweep-out").textContent =
    means.map((m, i) => `q=${i + 1}  mean error ${m.toFixed(4)}`).join("\n") + `\n(${ms.toFixed(0)} ms)`;
}

function runBound() {
  const classes = num("classes"), dim = num("dim");
  const json = softmaxBound(
    spec(Math.min(classes, dim)), classes, dim, num("brank"), num("bq"), num("samples"), num("radius"), num("seed"),
  );
  const r = JSON.parse(json);
  $("bound-out").textContent = [
    `||W - AB||_2        ${r.spectral_error.toExponential(4)}`,
    `bound R/2 * error   ${r.theoretical_bound.toExponential(4)}`,
    `max |p~ - p|        ${r.empirical_max_dev.toExponential(4)}`,
    `samples             ${r.samples_tested}`,
    `arg-max changes     ${r.label_flips}`,
  ].join("\n");
}

await init();
$("draw-spectrum").onclick = guarded(drawSpectrum);
$("run-sweep").onclick = guarded(runSweep);
$("run-bound").onclick = guarded(runBound);
guarded(drawSpectrum)();
