// Scripted browser session against the real annotation server: build a
// dataset with one unannotated demo, serve it, drive the app through jsdom
// events, and check the server's committed state after each round trip.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { createApp, type App } from "../src/app";
import { imageToCanvas } from "../src/coords";

const REPO = resolve(process.cwd(), "..");  // vitest runs from frontend/
const PY_ENV = { ...process.env, PYTHONPATH: join(REPO, "src") };

const MAKE_DATASET = `
import sys
import numpy as np
from sceneaug.geometry import TopDownConfig, TopDownObservation
from sceneaug.scene import Demo, DemoDataset, save_dataset

config = TopDownConfig()  # default 320x160 workspace
rng = np.random.default_rng(0)
rgb = rng.integers(60, 180, (config.height, config.width, 3), dtype=np.uint8)
hm = np.zeros((config.height, config.width), dtype=np.float32)
demo = Demo(id="demo-0", obs=TopDownObservation(rgb, hm, config),
            masks=None, action=None, task_text="put the block on the pad")
save_dataset(DemoDataset.build([demo]), sys.argv[1])
`;

let workdir: string;
let server: ChildProcess;
let baseUrl: string;

function buildDom(): Document {
  document.body.innerHTML = `
    <ul id="demo-list"></ul>
    <span id="task"></span><span id="tool"></span><span id="status"></span>
    <canvas id="scene" width="1280" height="680"></canvas>`;
  return document;
}

function clickAtImagePixel(app: App, u: number, v: number): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const [cx, cy] = imageToCanvas(app.view, u, v);
  // jsdom reports a zero bounding rect, so client coords are canvas coords
  canvas.dispatchEvent(new MouseEvent("click", {
    clientX: cx, clientY: cy, bubbles: true,
  }));
}

function pressKey(key: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true }));
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "sceneaug-ui-"));
  const made = spawnSync("python3", ["-c", MAKE_DATASET, join(workdir, "ds")], {
    env: PY_ENV, cwd: REPO, encoding: "utf-8",
  });
  if (made.status !== 0) throw new Error(`dataset build failed: ${made.stderr}`);

  server = spawn("python3", ["-m", "sceneaug", "serve-annotate",
                             "--dataset", join(workdir, "ds"), "--port", "0"],
                 { env: PY_ENV, cwd: REPO });
  baseUrl = await new Promise<string>((resolvePort, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`server start timeout: ${buffer}`)), 30000);
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const line = buffer.split("\n").find((l) => l.includes('"port"'));
      if (line) {
        clearTimeout(timer);
        resolvePort(`http://127.0.0.1:${(JSON.parse(line) as { port: number }).port}`);
      }
    });
    server.on("exit", (code: number | null) => reject(new Error(`server exited ${code}`)));
  });
});

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("scripted annotation session", () => {
  it("labels masks and points, server state matches exactly, 409 surfaced", async () => {
    const api = new ApiClient(baseUrl);
    const app = createApp(buildDom(), api);

    const demos = await app.refreshList();
    expect(demos.map((d) => d.id)).toEqual(["demo-0"]);
    expect(demos[0]!.annotated).toBe(false);
    await app.selectDemo("demo-0");
    expect(app.session!.width).toBe(320);
    expect(app.session!.height).toBe(160);

    // draw a triangle mask around the future pick point (keyboard tool 3)
    pressKey("3");
    for (const [u, v] of [[12, 32], [30, 32], [20, 48]] as const) {
      clickAtImagePixel(app, u, v);
    }
    expect(app.session!.stagedPolygon).toEqual([[12, 32], [30, 32], [20, 48]]);
    expect(await app.commit()).toBe("committed");
    let state = await api.getDemo("demo-0");
    expect(state.masks!.pick_pixels).toBeGreaterThan(0);

    // place mask: a square around (100, 80)
    pressKey("4");
    for (const [u, v] of [[88, 68], [112, 68], [112, 92], [88, 92]] as const) {
      clickAtImagePixel(app, u, v);
    }
    expect(await app.commit()).toBe("committed");

    // pick (20, 40) red point, place (100, 80) green point
    pressKey("1");
    clickAtImagePixel(app, 20, 40);
    expect(app.session!.stagedPick).toEqual([20, 40]);
    pressKey("2");
    clickAtImagePixel(app, 100, 80);
    expect(await app.commit()).toBe("committed");

    state = await api.getDemo("demo-0");
    expect(state.action).toEqual({ pick: [20, 40], place: [100, 80] });
    expect(state.violations).toEqual([]);
    expect(app.session!.committed.action).toEqual({ pick: [20, 40], place: [100, 80] });

    // 409 path: stage a pick on the background and try to commit
    pressKey("1");
    clickAtImagePixel(app, 200, 8);
    expect(await app.commit()).toBe("rejected");
    expect(app.status()).toContain("409");
    expect(app.status()).toContain("pick_px outside pick_object");
    // server state unchanged by the rejected commit
    state = await api.getDemo("demo-0");
    expect(state.action).toEqual({ pick: [20, 40], place: [100, 80] });

    // staged state preserved for correction, Escape clears it
    expect(app.session!.stagedPick).toEqual([200, 8]);
    pressKey("Escape");
    expect(app.session!.hasStaged()).toBe(false);
  });

  it("short polygons never reach the server", async () => {
    const api = new ApiClient(baseUrl);
    const app = createApp(buildDom(), api);
    await app.refreshList();
    await app.selectDemo("demo-0");
    pressKey("5");
    clickAtImagePixel(app, 3, 3);
    clickAtImagePixel(app, 8, 3);
    expect(await app.commit()).toBe("invalid");
    expect(app.status()).toContain("polygon needs at least 3 vertices");
  });

  it("exposes the dataset list with annotation status", async () => {
    const api = new ApiClient(baseUrl);
    const demos = await api.listDemos();
    expect(demos[0]!.annotated).toBe(true); // previous test completed it
  });
});
