export interface TermRef {
  raw_text?: string;
  curie?: string;
  label?: string;
  synonyms?: string[];
  ontology?: string;
  classification?: string;
}

export interface DatasetRecord {
  _id: string;
  name?: string;
  description?: string;
  identifier?: string;
  url?: string;
  includedInDataCatalog?: { name?: string; url?: string };
  conditionsOfAccess?: string;
  _provenance?: Record<string, string>;
  [key: string]: unknown;
}

export interface Hit {
  _id: string;
  score: number;
  record: DatasetRecord;
}

export interface FacetEntry {
  value: string;
  count: number;
}

export interface QueryResponse {
  took_ms: number;
  total: number;
  from: number;
  size: number;
  query_echo: string;
  hits: Hit[];
  facets: Record<string, FacetEntry[]>;
}

export interface SourceEntry {
  slug: string;
  name: string;
  type: string;
  research_domain: string;
  access: string;
}

export interface FieldsResponse {
  fields: Record<string, string>;
  facet_fields: string[];
}

export interface Filter {
  field: string;
  value: string;
}

export type Mode = "basic" | "advanced";

export interface UiState {
  query: string;
  mode: Mode;
  filters: Filter[];
  page: number;
  pageSize: number;
  detail: string | null;
}

export const DEFAULT_PAGE_SIZE = 10;

export function initialState(): UiState {
  return { query: "", mode: "basic", filters: [], page: 0, pageSize: DEFAULT_PAGE_SIZE, detail: null };
}

/** Sidebar facet panels, in display order. */
export const SIDEBAR_FACETS: ReadonlyArray<{ field: string; title: string }> = [
  { field: "species.label", title: "Host species" },
  { field: "infectiousAgent.label", title: "Infectious agent" },
  { field: "healthCondition.label", title: "Health condition" },
  { field: "measurementTechnique.label", title: "Measurement technique" },
  { field: "includedInDataCatalog.name", title: "Source repository" },
  { field: "conditionsOfAccess", title: "Access" },
];
