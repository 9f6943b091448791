import { ApiClient } from "./api.js";
import { PortalApp } from "./app.js";
import { renderApp } from "./render.js";

declare global {
  interface Window {
    PORTAL_API_BASE?: string;
  }
}

async function bootstrap(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app container");
  }
  const api = new ApiClient(window.PORTAL_API_BASE ?? "");
  let app: PortalApp;
  try {
    app = await PortalApp.create(api);
  } catch (err) {
    root.replaceChildren(
      Object.assign(document.createElement("div"), {
        className: "banner error",
        textContent: `API unreachable: ${err instanceof Error ? err.message : err}`,
      }),
    );
    return;
  }
  let lastUrl = "";
  app.onChange = () => {
    renderApp(root, app);
    const url = app.url;
    if (url !== lastUrl) {
      lastUrl = url;
      history.pushState(null, "", url ? `?${url}` : location.pathname);
    }
  };
  window.addEventListener("popstate", () => {
    lastUrl = location.search.slice(1);
    void app.restore(lastUrl);
  });
  lastUrl = location.search.slice(1);
  await app.restore(lastUrl);
}

void bootstrap();
