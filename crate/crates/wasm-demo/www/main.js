import init, { rate_curve, potential_profile, well_features, fpt_histogram } from "./pkg/kramers_zpf_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function setup(canvas) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, w, h);
  ctx.font = "12px system-ui, sans-serif";
  return { ctx, w, h };
}

// Axes with linear ticks; returns data-to-pixel maps.
function axes({ ctx, w, h }, [x0, x1], [y0, y1], xlabel, ylabel, yfmt = (v) => v.toPrecision(3)) {
  const m = { l: 70, r: 12, t: 10, b: 36 };
  const sx = (x) => m.l + ((x - x0) / (x1 - x0)) * (w - m.l - m.r);
  const sy = (y) => h - m.b - ((y - y0) / (y1 - y0)) * (h - m.t - m.b);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#333";
  ctx.beginPath();
  ctx.moveTo(m.l, m.t);
  ctx.lineTo(m.l, h - m.b);
  ctx.lineTo(w - m.r, h - m.b);
  ctx.stroke();
  for (let i = 0; i <= 5; i++) {
    const x = x0 + (i / 5) * (x1 - x0);
    const y = y0 + (i / 5) * (y1 - y0);
    ctx.fillText(x.toPrecision(3), sx(x) - 12, h - m.b + 14);
    ctx.fillText(yfmt(y), 4, sy(y) + 4);
  }
  ctx.fillText(xlabel, w / 2, h - 6);
  ctx.save();
  ctx.translate(12, m.t + 60);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
  return { sx, sy };
}

function line(ctx, pts, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  let started = false;
  for (const [x, y] of pts) {
    if (!Number.isFinite(y)) {
      started = false;
      continue;
    }
    if (started) ctx.lineTo(x, y);
    else ctx.moveTo(x, y);
    started = true;
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

function report(id, text, error = false) {
  $(id).textContent = text;
  $(id).classList.toggle("error", error);
}

function drawCurve() {
  try {
    const rows = rate_curve(num("c-hw"), num("c-du"), 0, num("c-tmax"), 200);
    const log = $("c-log").checked;
    const t = [], zp = [], arr = [];
    for (let i = 0; i < rows.length; i += 3) {
      t.push(rows[i]);
      zp.push(log ? Math.log10(rows[i + 1]) : rows[i + 1]);
      arr.push(log ? (rows[i + 2] > 0 ? Math.log10(rows[i + 2]) : -Infinity) : rows[i + 2]);
    }
    const finite = zp.concat(arr).filter(Number.isFinite);
    const hi = Math.max(...finite);
    const lo = log ? Math.max(Math.min(...finite), hi - 40) : 0;
    const c = setup($("c-plot"));
    const { sx, sy } = axes(c, [t[0], t[t.length - 1]], [lo, hi], "T (K)", log ? "log10 κ (1/s)" : "κ (1/s)");
    const clip = (v) => (v < lo ? NaN : v);
    line(c.ctx, t.map((x, i) => [sx(x), sy(clip(zp[i]))]), "#c33");
    line(c.ctx, t.map((x, i) => [sx(x), sy(clip(arr[i]))]), "#36c", [6, 4]);
    report("c-note", `solid: zero-point, κ(0) = ${rows[1].toPrecision(4)} /s; dashed: Arrhenius`);
  } catch (e) {
    report("c-note", String(e.message || e), true);
  }
}

function drawProfile() {
  try {
    const wa = num("p-wa"), wb = num("p-wb"), du = num("p-du");
    const rows = potential_profile(wa, wb, du, 300);
    const f = well_features(wa, wb, du);
    const x = [], u = [];
    for (let i = 0; i < rows.length; i += 2) {
      x.push(rows[i]);
      u.push(rows[i + 1]);
    }
    const c = setup($("p-plot"));
    const lo = Math.min(...u), hi = Math.max(...u);
    const pad = 0.05 * (hi - lo || 1);
    const { sx, sy } = axes(c, [x[0], x[x.length - 1]], [lo - pad, hi + pad], "x", "U(x)");
    line(c.ctx, x.map((v, i) => [sx(v), sy(u[i])]), "#222");
    c.ctx.fillStyle = "#c33";
    for (const xc of [f[0], f[1]]) {
      c.ctx.beginPath();
      c.ctx.arc(sx(xc), sy(xc === f[0] ? 0 : f[4]), 4, 0, 2 * Math.PI);
      c.ctx.fill();
    }
    report("p-note", `x_a = ${f[0].toFixed(3)}, x_b = ${f[1].toFixed(3)}, ΔU = ${f[4].toPrecision(4)}, absorbing point x_c = ${f[5].toFixed(3)}`);
  } catch (e) {
    report("p-note", String(e.message || e), true);
  }
}

function drawHistogram() {
  report("f-note", "running…");
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const rows = fpt_histogram(num("f-ratio"), num("f-gamma"), num("f-n"), BigInt(num("f-seed")), 30);
      const [kappa, se, analytic, escaped, censored] = rows;
      const left = [], right = [], count = [];
      for (let i = 5; i < rows.length; i += 3) {
        left.push(rows[i]);
        right.push(rows[i + 1]);
        count.push(rows[i + 2]);
      }
      const width = right[0] - left[0];
      const c = setup($("f-plot"));
      const density = count.map((n) => n / (escaped * width));
      const hi = Math.max(...density, kappa);
      const { sx, sy } = axes(c, [0, right[right.length - 1]], [0, hi * 1.05], "first-passage time", "density");
      c.ctx.fillStyle = "#9bc";
      left.forEach((l, i) => {
        c.ctx.fillRect(sx(l), sy(density[i]), sx(right[i]) - sx(l) - 1, sy(0) - sy(density[i]));
      });
      const ts = Array.from({ length: 200 }, (_, i) => (i / 199) * right[right.length - 1]);
      line(c.ctx, ts.map((t) => [sx(t), sy(kappa * Math.exp(-kappa * t))]), "#c33");
      const ms = (performance.now() - t0).toFixed(0);
      report(
        "f-note",
        `κ_MC = ${kappa.toPrecision(4)} ± ${se.toPrecision(2)}, analytic ${analytic.toPrecision(4)}; ` +
          `${escaped} escaped, ${censored} censored; ${ms} ms`,
      );
    } catch (e) {
      report("f-note", String(e.message || e), true);
    }
  }, 10);
}

await init();
for (const id of ["c-hw", "c-du", "c-tmax", "c-log"]) $(id).addEventListener("input", drawCurve);
for (const id of ["p-wa", "p-wb", "p-du"]) $(id).addEventListener("input", drawProfile);
$("f-run").addEventListener("click", drawHistogram);
window.addEventListener("resize", () => {
  drawCurve();
  drawProfile();
});
drawCurve();
drawProfile();
drawHistogram();
