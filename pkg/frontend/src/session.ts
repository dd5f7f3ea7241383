// Annotation session state: which tool is active, what is staged but not
// yet committed, and the committed mirror fetched from the server. Staged
// coordinates are always integer pixels inside the image; there is at most
// one staged pick and one staged place.

import type { DemoState, Role } from "./api";

export type Tool =
  | { kind: "pick-point" }
  | { kind: "place-point" }
  | { kind: "mask-polygon"; role: Role };

export type Px = [number, number];

export class AnnotationSession {
  readonly demoId: string;
  readonly width: number;
  readonly height: number;
  tool: Tool = { kind: "pick-point" };
  stagedPick: Px | null = null;
  stagedPlace: Px | null = null;
  stagedPolygon: Px[] = [];
  committed: DemoState;

  constructor(state: DemoState) {
    this.demoId = state.id;
    this.width = state.width;
    this.height = state.height;
    this.committed = state;
  }

  /** Server truth replaces the mirror; staged state is untouched. */
  refresh(state: DemoState): void {
    this.committed = state;
  }

  setTool(tool: Tool): void {
    this.tool = tool;
  }

  /** Route an image-pixel click to the active tool. Returns false when the
   * click is outside the image and therefore ignored. */
  click(u: number, v: number): boolean {
    if (!Number.isInteger(u) || !Number.isInteger(v)) return false;
    if (u < 0 || u >= this.width || v < 0 || v >= this.height) return false;
    switch (this.tool.kind) {
      case "pick-point":
        this.stagedPick = [u, v]; // a second click replaces the first
        break;
      case "place-point":
        this.stagedPlace = [u, v];
        break;
      case "mask-polygon":
        this.stagedPolygon.push([u, v]);
        break;
    }
    return true;
  }

  clearStaged(): void {
    this.stagedPick = null;
    this.stagedPlace = null;
    this.stagedPolygon = [];
  }

  /** Pick/place pair to commit: staged values win, committed values fill
   * the other slot so the two points can be labeled one at a time. */
  actionPayload(): { pick: Px; place: Px } | null {
    const pick = this.stagedPick ?? this.committed.action?.pick ?? null;
    const place = this.stagedPlace ?? this.committed.action?.place ?? null;
    if (pick === null || place === null) return null;
    return { pick, place };
  }

  polygonPayload(): { role: Role; polygon: Px[] } | null {
    if (this.tool.kind !== "mask-polygon") return null;
    return { role: this.tool.role, polygon: this.stagedPolygon };
  }

  /** Client-side validation before any request goes out. */
  validateStaged(): string[] {
    const problems: string[] = [];
    if (this.tool.kind === "mask-polygon") {
      if (this.stagedPolygon.length < 3) {
        problems.push("polygon needs at least 3 vertices");
      }
    } else if (this.actionPayload() === null) {
      problems.push("stage a pick and a place point first");
    }
    return problems;
  }

  hasStaged(): boolean {
    return this.stagedPick !== null || this.stagedPlace !== null
      || this.stagedPolygon.length > 0;
  }
}
