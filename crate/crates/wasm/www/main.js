import init, { chunk, similarity, search } from "./pkg/memora_wasm.js";

await init();

const $ = (id) => document.getElementById(id);
const show = (id, fn) => {
  try {
    $(id).textContent = fn();
  } catch (e) {
    $(id).textContent = `error: ${e.message ?? e}`;
  }
};

$("chunk-run").onclick = () =>
  show("chunk-out", () => JSON.stringify(JSON.parse(chunk($("chunk-text").value)), null, 2));

$("sim-run").onclick = () =>
  show("sim-out", () => similarity($("sim-a").value, $("sim-b").value).toFixed(4));

$("search-run").onclick = () =>
  show("search-out", () => {
    const entries = $("search-entries").value
      .split("\n")
      .filter((line) => line.trim())
      .map((text) => ({ text }));
    return JSON.stringify(JSON.parse(search(JSON.stringify(entries), $("search-query").value, 3)), null, 2);
  });
