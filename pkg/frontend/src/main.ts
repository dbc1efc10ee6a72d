/**
 * Browser bootstrap: fetch the feature schema, build the store, and
 * re-render the whole tree on every state change. `?debug=1` turns on
 * the development-only embedding scatter.
 */

import { TwinApi } from "./api";
import { createApp } from "./app";
import { mount } from "./dom";
import { renderApp } from "./views";

async function boot(): Promise<void> {
  const root = document.getElementById("root");
  if (root === null) throw new Error("missing #root element");
  const params = new URLSearchParams(window.location.search);
  const debug = params.get("debug") === "1";

  const api = new TwinApi("");
  let schema;
  try {
    schema = await api.schema();
  } catch (err) {
    root.textContent = `failed to load the feature schema: ${String(err)}`;
    return;
  }

  const app = createApp(schema, api, debug);

  function rerender(): void {
    // keep focus and caret across the full re-render
    const active = document.activeElement;
    const focusId = active instanceof HTMLElement ? active.id : "";
    const caret = active instanceof HTMLInputElement ? active.selectionStart : null;

    const el = mount(renderApp(app.getState(), app.actions), document);
    root!.replaceChildren(el);

    if (focusId !== "") {
      const again = document.getElementById(focusId);
      if (again instanceof HTMLElement) {
        again.focus();
        if (again instanceof HTMLInputElement && caret !== null) {
          again.setSelectionRange(caret, caret);
        }
      }
    }
  }

  app.subscribe(rerender);
  rerender();
}

void boot();
