import type { PortalApp } from "./app.js";
import type { BuilderRow, RowOp } from "./builder.js";
import { SIDEBAR_FACETS, type DatasetRecord, type TermRef } from "./types.js";

type Child = Node | string | null | undefined;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    if (child !== null && child !== undefined) {
      node.append(child);
    }
  }
  return node;
}

const DETAIL_GROUPS: ReadonlyArray<{ title: string; fields: string[] }> = [
  {
    title: "Required",
    fields: ["name", "description", "identifier", "url", "author", "funding",
             "measurementTechnique", "includedInDataCatalog", "distribution"],
  },
  {
    title: "Recommended",
    fields: ["healthCondition", "infectiousAgent", "species", "variableMeasured",
             "keywords", "doi", "temporalCoverage", "spatialCoverage",
             "conditionsOfAccess", "license", "usageInfo", "sdPublisher",
             "dateCreated", "dateModified", "datePublished", "citation",
             "isBasedOn", "citedBy"],
  },
  {
    title: "Optional",
    fields: ["hasPart", "isPartOf", "isRelatedTo", "isSimilarTo", "sameAs",
             "isBasisFor", "nctid", "version", "abstract", "isAccessibleForFree",
             "sourceOrganization", "topicCategory"],
  },
];

function isTermRefList(value: unknown): value is TermRef[] {
  return Array.isArray(value) && value.every(
    (v) => typeof v === "object" && v !== null && ("raw_text" in v || "label" in v));
}

function formatValue(value: unknown): string {
  if (value === null || value === undefined) return "";
  if (typeof value === "string" || typeof value === "number" || typeof value === "boolean") {
    return String(value);
  }
  if (isTermRefList(value)) {
    return value
      .map((ref) => {
        const label = ref.label ?? ref.raw_text ?? "";
        return ref.curie ? `${label} (${ref.curie})` : label;
      })
      .join("; ");
  }
  if (Array.isArray(value)) {
    return value.map(formatValue).join("; ");
  }
  if (typeof value === "object") {
    return Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined && v !== null && v !== "")
      .map(([k, v]) => `${k}: ${formatValue(v)}`)
      .join(", ");
  }
  return String(value);
}

function errorBanner(app: PortalApp): HTMLElement | null {
  if (!app.error) return null;
  const banner = el("div", { class: "banner error", role: "alert" },
    el("strong", {}, "Search failed: "),
    app.error.message,
  );
  if (app.error.position !== undefined && app.state.mode === "advanced") {
    const pos = app.error.position;
    banner.append(el("pre", { class: "caret-line" },
      el("span", {}, app.state.query.slice(0, pos)),
      el("mark", { class: "caret" }, app.state.query.slice(pos, pos + 1) || " "),
      el("span", {}, app.state.query.slice(pos + 1)),
    ));
  }
  const retry = el("button", { type: "button" }, "Retry");
  retry.addEventListener("click", () => void app.runSearch());
  banner.append(" ", retry);
  return banner;
}

function searchControls(app: PortalApp): HTMLElement {
  const form = el("form", { class: "searchbar" });
  const input = el("input", {
    type: "search",
    name: "q",
    placeholder: app.state.mode === "basic" ? "Search datasets…" : "Advanced query…",
    value: app.state.query,
    "aria-label": "query",
  });
  const submit = el("button", { type: "submit" }, "Search");
  form.append(input, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void app.setQuery(input.value);
  });
  const modes = el("div", { class: "modes" });
  for (const mode of ["basic", "advanced"] as const) {
    const button = el("button", {
      type: "button",
      class: app.state.mode === mode ? "mode active" : "mode",
    }, mode === "basic" ? "Basic" : "Advanced");
    button.addEventListener("click", () => void app.setMode(mode));
    modes.append(button);
  }
  return el("div", { class: "controls" }, modes, form);
}

function rowEditor(app: PortalApp, row: BuilderRow, groupIndex: number, rowIndex: number): HTMLElement {
  const fieldSelect = el("select", { class: "field" });
  for (const field of Object.keys(app.fieldInfo.fields).sort()) {
    const option = el("option", { value: field }, field);
    if (field === row.field) option.setAttribute("selected", "");
    fieldSelect.append(option);
  }
  fieldSelect.addEventListener("change", () => {
    row.field = fieldSelect.value;
    app.onChange();
  });
  const ops: RowOp[] = ["is", "phrase", "exists", "not-exists", "range"];
  const opSelect = el("select", { class: "op" });
  for (const op of ops) {
    const option = el("option", { value: op }, op);
    if (op === row.op) option.setAttribute("selected", "");
    opSelect.append(option);
  }
  opSelect.addEventListener("change", () => {
    row.op = opSelect.value as RowOp;
    app.onChange();
  });
  const editor = el("div", { class: "row" }, fieldSelect, opSelect);
  if (row.op === "is" || row.op === "phrase") {
    const value = el("input", { type: "text", value: row.value, placeholder: "value" });
    value.addEventListener("input", () => {
      row.value = value.value;
      app.onChange();
    });
    editor.append(value);
  } else if (row.op === "range") {
    const lo = el("input", { type: "date", value: row.lo ?? "" });
    const hi = el("input", { type: "date", value: row.hi ?? "" });
    lo.addEventListener("input", () => { row.lo = lo.value; app.onChange(); });
    hi.addEventListener("input", () => { row.hi = hi.value; app.onChange(); });
    editor.append(lo, " to ", hi);
  }
  const remove = el("button", { type: "button", class: "remove" }, "✕");
  remove.addEventListener("click", () => {
    app.builder.groups[groupIndex].rows.splice(rowIndex, 1);
    app.onChange();
  });
  editor.append(remove);
  return editor;
}

function builderView(app: PortalApp): HTMLElement {
  const container = el("div", { class: "builder" });
  app.builder.groups.forEach((group, groupIndex) => {
    const groupBox = el("fieldset", { class: "group" },
      el("legend", {}, `Group ${groupIndex + 1}`));
    const join = el("select", { class: "join" });
    for (const value of ["AND", "OR"]) {
      const option = el("option", { value }, value);
      if (value === group.join) option.setAttribute("selected", "");
      join.append(option);
    }
    join.addEventListener("change", () => {
      group.join = join.value as "AND" | "OR";
      app.onChange();
    });
    groupBox.append(el("label", {}, "join rows with ", join));
    group.rows.forEach((row, rowIndex) => groupBox.append(rowEditor(app, row, groupIndex, rowIndex)));
    const addRow = el("button", { type: "button" }, "+ row");
    addRow.addEventListener("click", () => {
      const firstField = Object.keys(app.fieldInfo.fields).sort()[0] ?? "name";
      group.rows.push({ field: firstField, op: "is", value: "" });
      app.onChange();
    });
    groupBox.append(addRow);
    container.append(groupBox);
  });
  const addGroup = el("button", { type: "button" }, "+ group");
  addGroup.addEventListener("click", () => {
    app.builder.groups.push({ join: "AND", rows: [] });
    app.onChange();
  });
  const preview = app.builderString();
  const submit = el("button", { type: "button", class: "apply" }, "Run query");
  if (!preview) {
    submit.setAttribute("disabled", "");
  }
  submit.addEventListener("click", () => void app.applyBuilder());
  container.append(
    addGroup,
    el("div", { class: "preview" },
      el("code", { class: "emitted" }, preview || "(empty query)"), submit),
  );
  if (app.results?.query_echo && app.state.mode === "advanced") {
    container.append(el("div", { class: "echo" }, "server echo: ",
      el("code", {}, app.results.query_echo)));
  }
  return container;
}

function facetSidebar(app: PortalApp): HTMLElement {
  const sidebar = el("aside", { class: "sidebar" });
  const facets = app.results?.facets ?? {};
  for (const { field, title } of SIDEBAR_FACETS) {
    const panel = el("section", { class: "facet", "data-field": field },
      el("h3", {}, title));
    for (const entry of facets[field] ?? []) {
      const checkbox = el("input", { type: "checkbox", "data-value": entry.value });
      if (app.filterActive(field, entry.value)) {
        checkbox.setAttribute("checked", "");
        (checkbox as HTMLInputElement).checked = true;
      }
      checkbox.addEventListener("change", () => void app.toggleFilter(field, entry.value));
      panel.append(el("label", { class: "facet-value" },
        checkbox, ` ${entry.value} `, el("span", { class: "count" }, `(${entry.count})`)));
    }
    sidebar.append(panel);
  }
  if (app.state.filters.length) {
    const clear = el("button", { type: "button", class: "clear" }, "Clear all filters");
    clear.addEventListener("click", () => void app.clearFilters());
    sidebar.append(clear);
  }
  return sidebar;
}

function resultCard(app: PortalApp, record: DatasetRecord): HTMLElement {
  const title = record.name ?? record._id;
  const link = record.url
    ? el("a", { href: record.url, target: "_blank", rel: "noopener" }, title)
    : el("span", {}, title);
  const description = record.description ?? "";
  const snippet = description.length > 240 ? `${description.slice(0, 240)}…` : description;
  const details = el("button", { type: "button", class: "details" }, "Details");
  details.addEventListener("click", () => void app.openDetail(record._id));
  return el("article", { class: "card", "data-id": record._id },
    el("h3", {}, link),
    el("p", {}, snippet),
    el("div", { class: "badges" },
      el("span", { class: "badge source" }, record.includedInDataCatalog?.name ?? "unknown source"),
      record.conditionsOfAccess
        ? el("span", { class: "badge access" }, record.conditionsOfAccess)
        : null,
    ),
    details,
  );
}

function resultsView(app: PortalApp): HTMLElement {
  const main = el("main", { class: "results" });
  if (!app.results) {
    main.append(el("p", { class: "hint" }, "Type a query to search the catalog."));
    return main;
  }
  const { total, hits } = app.results;
  main.append(el("p", { class: "total" }, `${total} dataset${total === 1 ? "" : "s"}`));
  for (const hit of hits) {
    main.append(resultCard(app, hit.record));
  }
  const pages = Math.ceil(total / app.state.pageSize);
  if (pages > 1) {
    const nav = el("nav", { class: "pager" });
    const prev = el("button", { type: "button" }, "← Prev");
    const next = el("button", { type: "button" }, "Next →");
    if (app.state.page === 0) prev.setAttribute("disabled", "");
    if (app.state.page >= pages - 1) next.setAttribute("disabled", "");
    prev.addEventListener("click", () => void app.setPage(app.state.page - 1));
    next.addEventListener("click", () => void app.setPage(app.state.page + 1));
    nav.append(prev, el("span", {}, ` page ${app.state.page + 1} of ${pages} `), next);
    main.append(nav);
  }
  return main;
}

function detailView(app: PortalApp): HTMLElement {
  const container = el("main", { class: "detail" });
  const back = el("button", { type: "button", class: "back" }, "← Back to results");
  back.addEventListener("click", () => app.closeDetail());
  container.append(back);
  if (app.detailError) {
    container.append(el("div", { class: "banner error" },
      el("h2", {}, "Dataset not found"), app.detailError.message));
    return container;
  }
  const record = app.detailRecord;
  if (!record) {
    container.append(el("p", {}, "Loading…"));
    return container;
  }
  const provenance = record._provenance ?? {};
  container.append(el("h2", {}, record.name ?? record._id));
  container.append(el("div", { class: "badges" },
    el("span", { class: "badge source" }, record.includedInDataCatalog?.name ?? "unknown source"),
    record.conditionsOfAccess
      ? el("span", { class: "badge access" }, record.conditionsOfAccess)
      : null,
  ));
  if (record.url) {
    container.append(el("p", {},
      el("a", { href: record.url, target: "_blank", rel: "noopener", class: "outbound" },
        "Open at source repository ↗")));
  }
  for (const group of DETAIL_GROUPS) {
    const rows = group.fields
      .filter((field) => record[field] !== undefined && record[field] !== null)
      .map((field) => {
        const badge = provenance[field]
          ? el("span", { class: `badge stage stage-${provenance[field]}` }, provenance[field])
          : null;
        return el("tr", { "data-field": field },
          el("th", {}, field, badge ? " " : "", badge),
          el("td", {}, formatValue(record[field])),
        );
      });
    if (rows.length) {
      container.append(el("section", { class: "field-group" },
        el("h3", {}, group.title),
        el("table", {}, ...rows)));
    }
  }
  return container;
}

/** Render the whole application into root. Always produces a full page,
 * even when the last request failed. */
export function renderApp(root: HTMLElement, app: PortalApp): void {
  const children: Child[] = [
    el("header", {}, el("h1", {}, "Dataset Discovery"), searchControls(app)),
    errorBanner(app),
  ];
  if (app.state.mode === "advanced" && !app.state.detail) {
    children.push(builderView(app));
  }
  if (app.state.detail) {
    children.push(detailView(app));
  } else {
    children.push(el("div", { class: "layout" }, facetSidebar(app), resultsView(app)));
  }
  root.replaceChildren(...children.filter((c): c is Node => c !== null && c !== undefined));
}
