import { DEFAULT_PAGE_SIZE, initialState, type Mode, type UiState } from "./types.js";

/** Serialize the whole UI state into a query string, so every view is a
 * shareable, reloadable link. Defaults are omitted for clean URLs. */
export function encodeState(state: UiState): string {
  const params = new URLSearchParams();
  if (state.query) params.set("q", state.query);
  if (state.mode !== "basic") params.set("mode", state.mode);
  for (const filter of state.filters) {
    params.append("f", `${filter.field}:${filter.value}`);
  }
  if (state.page > 0) params.set("page", String(state.page));
  if (state.pageSize !== DEFAULT_PAGE_SIZE) params.set("size", String(state.pageSize));
  if (state.detail) params.set("detail", state.detail);
  return params.toString();
}

export function decodeState(queryString: string): UiState {
  const params = new URLSearchParams(queryString);
  const state = initialState();
  state.query = params.get("q") ?? "";
  state.mode = (params.get("mode") === "advanced" ? "advanced" : "basic") as Mode;
  for (const pair of params.getAll("f")) {
    const colon = pair.indexOf(":");
    if (colon > 0 && colon < pair.length - 1) {
      state.filters.push({ field: pair.slice(0, colon), value: pair.slice(colon + 1) });
    }
  }
  const page = Number(params.get("page") ?? "0");
  state.page = Number.isInteger(page) && page > 0 ? page : 0;
  const size = Number(params.get("size") ?? String(DEFAULT_PAGE_SIZE));
  state.pageSize = Number.isInteger(size) && size >= 1 && size <= 1000 ? size : DEFAULT_PAGE_SIZE;
  state.detail = params.get("detail");
  return state;
}
