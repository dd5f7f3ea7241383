// Application wiring: demo list, canvas interaction (click to annotate,
// wheel zoom, drag pan), keyboard shortcuts, and commits that re-render
// from the server's state, never from staged state.

import { ApiClient, type DemoSummary } from "./api";
import { canvasToImage, fitView, panBy, zoomAt, type View } from "./coords";
import { drawScene } from "./render";
import { AnnotationSession, type Tool } from "./session";

export interface App {
  api: ApiClient;
  session: AnnotationSession | null;
  view: View;
  selectDemo(id: string): Promise<void>;
  clickCanvas(canvasX: number, canvasY: number): boolean;
  setTool(tool: Tool): void;
  commit(): Promise<string>;
  refreshList(): Promise<DemoSummary[]>;
  status(): string;
}

export function createApp(root: Document, api: ApiClient): App {
  const canvas = root.getElementById("scene") as HTMLCanvasElement;
  const listEl = root.getElementById("demo-list") as HTMLElement;
  const statusEl = root.getElementById("status") as HTMLElement;
  const taskEl = root.getElementById("task") as HTMLElement;
  const toolEl = root.getElementById("tool") as HTMLElement;

  let image: HTMLImageElement | null = null;
  let inFlight = false;

  const app: App = {
    api,
    session: null,
    view: { scale: 4, offsetX: 0, offsetY: 0 },

    async refreshList() {
      const demos = await api.listDemos();
      listEl.innerHTML = "";
      for (const d of demos) {
        const item = root.createElement("li");
        const button = root.createElement("button");
        button.textContent = `${d.id} ${d.annotated ? "[done]" : "[todo]"}`;
        button.dataset.demoId = d.id;
        button.addEventListener("click", () => void app.selectDemo(d.id));
        item.appendChild(button);
        listEl.appendChild(item);
      }
      return demos;
    },

    async selectDemo(id: string) {
      const state = await api.getDemo(id);
      app.session = new AnnotationSession(state);
      app.view = fitView(state.width, state.height, canvas.width, canvas.height);
      taskEl.textContent = `${state.id}: ${state.task_text}`;
      image = null;
      if (typeof Image !== "undefined") {
        const img = new Image();
        img.src = api.topdownUrl(id);
        img.onload = () => {
          image = img;
          redraw();
        };
      }
      setStatus(state.violations.length
        ? `pending: ${state.violations.join("; ")}`
        : "annotated");
      redraw();
    },

    clickCanvas(canvasX: number, canvasY: number): boolean {
      if (!app.session) return false;
      const [u, v] = canvasToImage(app.view, canvasX, canvasY);
      const accepted = app.session.click(u, v);
      if (accepted) redraw();
      return accepted;
    },

    setTool(tool: Tool) {
      app.session?.setTool(tool);
      toolEl.textContent = tool.kind === "mask-polygon"
        ? `tool: mask (${tool.role})`
        : `tool: ${tool.kind}`;
    },

    async commit(): Promise<string> {
      const session = app.session;
      if (!session || inFlight) return "busy";
      const problems = session.validateStaged();
      if (problems.length) {
        setStatus(`invalid: ${problems.join("; ")}`);
        return "invalid";
      }
      inFlight = true;
      setStatus("committing...");
      try {
        const result = session.tool.kind === "mask-polygon"
          ? await api.postMask(session.demoId, session.tool.role,
                               session.polygonPayload()!.polygon)
          : await (() => {
              const payload = session.actionPayload()!;
              return api.postAction(session.demoId, payload.pick, payload.place);
            })();
        if (result.ok) {
          session.clearStaged();
          // re-render exclusively from the server's committed truth
          session.refresh(await api.getDemo(session.demoId));
          setStatus("committed");
          redraw();
          return "committed";
        }
        const detail = result.violations.length
          ? result.violations.join("; ")
          : result.message;
        setStatus(`rejected (${result.status}): ${detail}`);
        return "rejected";
      } catch (err) {
        // network failure: staged state is preserved for retry
        setStatus(`network error, staged kept: ${String(err)}`);
        return "error";
      } finally {
        inFlight = false;
      }
    },

    status() {
      return statusEl.textContent ?? "";
    },
  };

  function setStatus(text: string) {
    statusEl.textContent = text;
  }

  function redraw() {
    if (app.session) drawScene(canvas, app.view, image, app.session);
  }

  canvas.addEventListener("click", (ev: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    app.clickCanvas(ev.clientX - rect.left, ev.clientY - rect.top);
  });

  canvas.addEventListener("wheel", (ev: WheelEvent) => {
    ev.preventDefault();
    const rect = canvas.getBoundingClientRect();
    const factor = ev.deltaY < 0 ? 1.25 : 0.8;
    app.view = zoomAt(app.view, ev.clientX - rect.left, ev.clientY - rect.top, factor);
    redraw();
  });

  let dragging: [number, number] | null = null;
  canvas.addEventListener("mousedown", (ev: MouseEvent) => {
    if (ev.button === 1 || ev.shiftKey) dragging = [ev.clientX, ev.clientY];
  });
  canvas.addEventListener("mousemove", (ev: MouseEvent) => {
    if (!dragging) return;
    app.view = panBy(app.view, ev.clientX - dragging[0], ev.clientY - dragging[1]);
    dragging = [ev.clientX, ev.clientY];
    redraw();
  });
  canvas.addEventListener("mouseup", () => {
    dragging = null;
  });

  root.addEventListener("keydown", (ev: Event) => {
    const key = (ev as KeyboardEvent).key;
    if (key === "1") app.setTool({ kind: "pick-point" });
    else if (key === "2") app.setTool({ kind: "place-point" });
    else if (key === "3") app.setTool({ kind: "mask-polygon", role: "pick" });
    else if (key === "4") app.setTool({ kind: "mask-polygon", role: "place" });
    else if (key === "5") app.setTool({ kind: "mask-polygon", role: "distractor" });
    else if (key === "Enter") void app.commit();
    else if (key === "Escape") {
      app.session?.clearStaged();
      redraw();
    }
  });

  return app;
}
