import init, { wasserstein_view, centrality_view, train_planted } from "./pkg/hinimp_web.js";

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, xs, ys) {
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toFixed(3), 2, pad + 4);
  ctx.fillText(y0.toFixed(3), 2, h - pad);
  ctx.fillText(x0.toFixed(2), pad, h - 10);
  ctx.fillText(x1.toFixed(2), w - pad - 30, h - 10);
  return [sx, sy];
}

function line(ctx, pts, color, step) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    if (i === 0) ctx.moveTo(x, y);
    else if (step) { ctx.lineTo(x, pts[i - 1][1]); ctx.lineTo(x, y); }
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function legend(ctx, items) {
  items.forEach(([label, color], i) => {
    ctx.fillStyle = color;
    ctx.fillText(label, 50, 45 + 14 * i);
  });
}

function runOt() {
  try {
    const v = JSON.parse(wasserstein_view($("ot-values").value, Number($("ot-seed").value)));
    $("ot-out").textContent =
      `reference  ${v.reference.map((x) => x.toFixed(3)).join(", ")}\n` +
      `embedding  ${v.embedding.map((x) => x.toFixed(3)).join(", ")}\n` +
      `||h*||_1 = ${v.l1_norm.toFixed(6)}   d * W1 = ${v.distance.toFixed(6)}`;
    const c = $("ot-plot"), ctx = c.getContext("2d");
    const [sx, sy] = axes(ctx, c.width, c.height, v.cdf.map((p) => p[0]), [0, 1]);
    line(ctx, v.cdf.map((p) => [sx(p[0]), sy(p[1])]), "#c33", true);
    line(ctx, v.cdf.map((p) => [sx(p[0]), sy(p[2])]), "#36c", true);
    legend(ctx, [["CDF of h", "#c33"], ["CDF of reference", "#36c"]]);
  } catch (e) {
    $("ot-out").textContent = String(e);
  }
}

function runCentrality() {
  try {
    const v = JSON.parse(centrality_view(Number($("c-n").value), Number($("c-p").value), Number($("c-seed").value)));
    const c = $("c-plot"), ctx = c.getContext("2d");
    ctx.clearRect(0, 0, c.width, c.height);
    const pos = [...Array(v.nodes).keys()].map((i) => {
      const a = (2 * Math.PI * i) / v.nodes;
      return [c.width / 2 + 140 * Math.cos(a), c.height / 2 + 140 * Math.sin(a)];
    });
    ctx.strokeStyle = "#bbb";
    for (const [a, b] of v.edges) {
      ctx.beginPath(); ctx.moveTo(...pos[a]); ctx.lineTo(...pos[b]); ctx.stroke();
    }
    pos.forEach(([x, y], i) => {
      const pr = v.normalized[i][1];
      ctx.fillStyle = `hsl(${220 - 200 * pr}, 70%, 50%)`;
      ctx.beginPath(); ctx.arc(x, y, 4 + 8 * pr, 0, 2 * Math.PI); ctx.fill();
    });
    ctx.fillStyle = "#555";
    ctx.fillText("node size and colour: normalized PageRank", 10, 15);
    const head = `<tr><th>node</th>${v.measures.map((m) => `<th>${m}</th>`).join("")}</tr>`;
    const rows = v.raw.map((r, i) => `<tr><td>${i}</td>${r.map((x) => `<td>${x.toFixed(4)}</td>`).join("")}</tr>`);
    $("c-table").innerHTML = `<table>${head}${rows.join("")}</table>`;
  } catch (e) {
    $("c-table").textContent = String(e);
  }
}

function runTrain() {
  $("t-out").textContent = "training...";
  // Let the status text paint before the blocking call.
  setTimeout(() => {
    try {
      const v = JSON.parse(train_planted(Number($("t-epochs").value), $("t-variant").value, Number($("t-seed").value)));
      $("t-out").textContent =
        `best epoch ${v.best_epoch}\n` +
        `test MAE ${v.test_mae.toFixed(4)} (label std ${v.label_std.toFixed(4)})\n` +
        `test Spearman ${v.test_spearman.toFixed(4)}   test NDCG ${v.test_ndcg.toFixed(4)}`;
      const c = $("t-plot"), ctx = c.getContext("2d");
      const all = v.train_mae.concat(v.val_mae);
      const [sx, sy] = axes(ctx, c.width, c.height, v.epochs, all);
      line(ctx, v.epochs.map((e, i) => [sx(e), sy(v.train_mae[i])]), "#c33");
      line(ctx, v.epochs.map((e, i) => [sx(e), sy(v.val_mae[i])]), "#36c");
      legend(ctx, [["train MAE", "#c33"], ["validation MAE", "#36c"]]);
    } catch (e) {
      $("t-out").textContent = String(e);
    }
  }, 20);
}

await init();
$("ot-run").onclick = runOt;
$("c-run").onclick = runCentrality;
$("t-run").onclick = runTrain;
runOt();
runCentrality();
