import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { boot } from "../src/main";
import type { App } from "../src/main";
import { ApiClient } from "../src/api";
import { ROUTE_COLORS } from "../src/scale";
import { clickAt, installCanvasStub } from "./helpers";
import type { CanvasLog } from "./helpers";

// End-to-end flow against the real service on the bundled demo snapshot:
// two clicks compare the routes, the slider re-penalizes, the heatmap
// colors the edges. Needs python3 with the backend package installed.

const HERE = path.dirname(fileURLToPath(import.meta.url));
const REPO = path.resolve(HERE, "..", "..");
const DEMO = path.join(REPO, "demo");
const DIST_INDEX = path.join(REPO, "frontend", "dist", "index.html");

let proc: ChildProcess;
let base: string;
let api: ApiClient;
let app: App;
let canvasLog: CanvasLog;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close(() => resolve(port));
    });
  });
}

async function until(cond: () => boolean | Promise<boolean>, ms: number, what: string) {
  const start = Date.now();
  for (;;) {
    if (await cond()) return;
    if (Date.now() - start > ms) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 100));
  }
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const cfgDir = mkdtempSync(path.join(tmpdir(), "affect-ui-"));
  const lines = [
    "[paths]",
    `graph = ${JSON.stringify(path.join(DEMO, "graph.npz"))}`,
    `layer = ${JSON.stringify(path.join(DEMO, "layer.csv"))}`,
    "",
    "[service]",
    'host = "127.0.0.1"',
    `port = ${port}`,
  ];
  if (existsSync(DIST_INDEX)) {
    lines.push(`ui_dir = ${JSON.stringify(path.dirname(DIST_INDEX))}`);
  }
  const cfgPath = path.join(cfgDir, "config.toml");
  writeFileSync(cfgPath, lines.join("\n") + "\n");

  proc = spawn("python3", ["-m", "affect_router.cli", "--config", cfgPath, "serve"], {
    cwd: REPO,
    stdio: ["ignore", "pipe", "pipe"],
  });
  let stderr = "";
  proc.stderr!.on("data", (chunk: Buffer) => (stderr += chunk));
  proc.stdout!.resume();
  await until(
    async () => {
      if (proc.exitCode !== null) {
        throw new Error(`server exited early (${proc.exitCode}): ${stderr}`);
      }
      try {
        const resp = await fetch(base + "/health");
        return resp.ok;
      } catch {
        return false;
      }
    },
    60_000,
    "the service to come up",
  );
  api = new ApiClient(base);
}, 90_000);

afterAll(async () => {
  if (proc && proc.exitCode === null) {
    proc.kill("SIGTERM");
    await new Promise((r) => {
      proc.once("exit", r);
      setTimeout(r, 3000);
    });
  }
});

describe("demo snapshot flow", () => {
  it(
    "boots against the live service",
    async () => {
      canvasLog = installCanvasStub();
      const root = document.createElement("div");
      document.body.appendChild(root);
      app = await boot(root, api);
      expect(root.querySelector("#status")!.textContent).toMatch(/\d+ edges/);
      // demo layer present, so the heatmap stays available
      expect(app.elements.heatmap.disabled).toBe(false);
    },
    30_000,
  );

  it(
    "two clicks draw the comparison in red and blue",
    async () => {
      clickAt(app.elements.canvas, 160, 520);
      clickAt(app.elements.canvas, 760, 110);
      await until(
        () => document.querySelector("#stat-delta") !== null,
        15_000,
        "the compare panel",
      );
      expect(app.state.compare).not.toBeNull();
      expect(canvasLog.strokes).toContain(ROUTE_COLORS.fastest);
      expect(canvasLog.strokes).toContain(ROUTE_COLORS.happy);
      const overlap = document.querySelector("#stat-overlap") as HTMLElement;
      expect(Number(overlap.dataset.value)).toBeGreaterThan(0);
    },
    30_000,
  );

  it(
    "sliding lambda to zero shows delta 0 s and overlap 100%",
    async () => {
      const slider = app.elements.slider;
      expect(slider.disabled).toBe(false);
      slider.value = "0";
      slider.dispatchEvent(new Event("input", { bubbles: true }));
      await until(
        () => {
          const el = document.querySelector("#stat-delta") as HTMLElement | null;
          return el !== null && el.dataset.value === "0";
        },
        15_000,
        "the lambda=0 comparison",
      );
      const delta = document.querySelector("#stat-delta") as HTMLElement;
      const overlap = document.querySelector("#stat-overlap") as HTMLElement;
      expect(delta.dataset.value).toBe("0");
      expect(delta.textContent).toBe("0.0 s");
      expect(overlap.dataset.value).toBe("100");
      expect(overlap.textContent).toBe("100.0%");
    },
    30_000,
  );

  it(
    "toggling the heatmap refetches the layer and paints scale colors",
    async () => {
      const before = canvasLog.strokes.length;
      app.elements.heatmap.checked = true;
      app.elements.heatmap.dispatchEvent(new Event("change", { bubbles: true }));
      await until(
        () => canvasLog.strokes.slice(before).some((s) => s.startsWith("hsl(")),
        15_000,
        "heatmap strokes",
      );
      expect(document.querySelector("#legend")!.hasAttribute("hidden")).toBe(false);
    },
    30_000,
  );

  it(
    "serves the built page under /ui when dist exists",
    async () => {
      if (!existsSync(DIST_INDEX)) return;
      const resp = await fetch(base + "/ui/");
      expect(resp.status).toBe(200);
      const text = await resp.text();
      expect(text).toContain('id="app"');
    },
    30_000,
  );
});
