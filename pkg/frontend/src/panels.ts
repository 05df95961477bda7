/**
 * Fractional panel layout: every pane lives at (x, y, w, h) in [0, 1] of
 * the workspace, draggable by header, resizable by corner, one pane
 * maximizable at a time. Layout changes surface as whole-layout snapshots
 * (how the recording stores them), and students can persist a preferred
 * arrangement locally.
 */

import { PaneSpec } from "./wire.js";

const LAYOUT_STORE_KEY = "tutorcast.layout";

export class PanelManager {
  private panes: PaneSpec[];
  readonly elements = new Map<string, HTMLElement>();

  constructor(
    readonly container: HTMLElement,
    panes: PaneSpec[],
    private readonly onChange?: (panes: PaneSpec[]) => void,
  ) {
    this.panes = panes.map((p) => ({ ...p }));
  }

  get layout(): PaneSpec[] {
    return this.panes.map((p) => ({ ...p }));
  }

  setLayout(panes: PaneSpec[], emit = false): void {
    this.panes = panes.map((p) => ({ ...p }));
    this.render();
    if (emit) this.onChange?.(this.layout);
  }

  /** Move/resize one pane; geometry clamps into [0, 1]. */
  movePane(paneId: string, x: number, y: number, width?: number, height?: number): void {
    const clamp = (v: number) => Math.min(1, Math.max(0, v));
    this.panes = this.panes.map((p) =>
      p.paneId === paneId
        ? {
            ...p,
            x: clamp(x),
            y: clamp(y),
            width: clamp(width ?? p.width),
            height: clamp(height ?? p.height),
          }
        : p,
    );
    this.render();
    this.onChange?.(this.layout);
  }

  toggleMaximize(paneId: string): void {
    this.panes = this.panes.map((p) => ({
      ...p,
      maximized: p.paneId === paneId ? !p.maximized : false,
    }));
    this.render();
    this.onChange?.(this.layout);
  }

  setVisible(paneId: string, visible: boolean): void {
    this.panes = this.panes.map((p) => (p.paneId === paneId ? { ...p, visible } : p));
    this.render();
    this.onChange?.(this.layout);
  }

  saveToLocal(): void {
    localStorage.setItem(LAYOUT_STORE_KEY, JSON.stringify(this.panes));
  }

  loadFromLocal(): boolean {
    const raw = localStorage.getItem(LAYOUT_STORE_KEY);
    if (!raw) return false;
    try {
      this.panes = JSON.parse(raw) as PaneSpec[];
      this.render();
      return true;
    } catch {
      return false;
    }
  }

  attach(paneId: string, element: HTMLElement): void {
    this.elements.set(paneId, element);
    this.container.appendChild(element);
    this.installDrag(paneId, element);
    this.render();
  }

  render(): void {
    const maximized = this.panes.find((p) => p.maximized);
    for (const pane of this.panes) {
      const el = this.elements.get(pane.paneId);
      if (!el) continue;
      const geo = maximized && maximized.paneId === pane.paneId ? { x: 0, y: 0, width: 1, height: 1 } : pane;
      el.style.left = `${geo.x * 100}%`;
      el.style.top = `${geo.y * 100}%`;
      el.style.width = `${geo.width * 100}%`;
      el.style.height = `${geo.height * 100}%`;
      const hidden = !pane.visible || (maximized !== undefined && maximized.paneId !== pane.paneId);
      el.style.display = hidden ? "none" : "flex";
    }
  }

  private installDrag(paneId: string, element: HTMLElement): void {
    const header = element.querySelector<HTMLElement>(".pane-header");
    if (!header) return;
    header.addEventListener("pointerdown", (down: PointerEvent) => {
      if ((down.target as HTMLElement).closest("button")) return;
      const rect = this.container.getBoundingClientRect();
      if (rect.width === 0 || rect.height === 0) return;
      const pane = this.panes.find((p) => p.paneId === paneId);
      if (!pane) return;
      const offsetX = down.clientX / rect.width - pane.x;
      const offsetY = down.clientY / rect.height - pane.y;
      const move = (ev: PointerEvent) => {
        this.movePane(paneId, ev.clientX / rect.width - offsetX, ev.clientY / rect.height - offsetY);
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    });
  }
}

export function paneShell(paneId: string, title: string): HTMLElement {
  const el = document.createElement("section");
  el.className = "pane";
  el.dataset.pane = paneId;
  el.innerHTML = `
    <div class="pane-header">
      <span class="pane-title">${title}</span>
      <button class="pane-max" title="maximize">&#x26F6;</button>
    </div>
    <div class="pane-body"></div>
  `;
  return el;
}
