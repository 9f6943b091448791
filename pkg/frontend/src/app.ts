import { ApiClient, ApiError } from "./api.js";
import { type BuilderState, emptyBuilder, type FieldInfo, serializeBuilder } from "./builder.js";
import { createGate } from "./gate.js";
import {
  type DatasetRecord,
  type QueryResponse,
  SIDEBAR_FACETS,
  type Mode,
  type UiState,
  initialState,
} from "./types.js";
import { decodeState, encodeState } from "./urlstate.js";

export interface UiError {
  message: string;
  code?: string;
  position?: number;
}

function toUiError(err: unknown): UiError {
  if (err instanceof ApiError) {
    return { message: err.message, code: err.code, position: err.position };
  }
  return { message: err instanceof Error ? err.message : String(err) };
}

/** All client state and transitions; rendering subscribes via onChange.
 * The app never computes counts or rankings itself: facet numbers and hits
 * always come from the latest API response, stale responses are dropped. */
export class PortalApp {
  state: UiState = initialState();
  results: QueryResponse | null = null;
  error: UiError | null = null;
  detailRecord: DatasetRecord | null = null;
  detailError: UiError | null = null;
  builder: BuilderState = emptyBuilder();
  onChange: () => void = () => {};

  private searchGate = createGate();
  private detailGate = createGate();

  constructor(readonly api: ApiClient, readonly fieldInfo: FieldInfo) {}

  /** Fetches the field list once; everything else is per-interaction. */
  static async create(api: ApiClient): Promise<PortalApp> {
    const fields = await api.fields();
    return new PortalApp(api, { fields: fields.fields });
  }

  get url(): string {
    return encodeState(this.state);
  }

  builderString(): string {
    return serializeBuilder(this.builder, this.fieldInfo);
  }

  filterActive(field: string, value: string): boolean {
    return this.state.filters.some((f) => f.field === field && f.value === value);
  }

  async runSearch(): Promise<void> {
    const token = this.searchGate.next();
    try {
      const response = await this.api.search({
        ...(this.state.mode === "advanced"
          ? { advancedQuery: this.state.query }
          : { q: this.state.query }),
        filters: this.state.filters,
        from: this.state.page * this.state.pageSize,
        size: this.state.pageSize,
        facets: SIDEBAR_FACETS.map((f) => f.field),
        facetSize: 15,
      });
      if (!this.searchGate.isCurrent(token)) {
        return;
      }
      this.results = response;
      this.error = null;
    } catch (err) {
      if (!this.searchGate.isCurrent(token)) {
        return;
      }
      this.error = toUiError(err); // previous results stay; never a blank page
    }
    this.onChange();
  }

  async setQuery(query: string): Promise<void> {
    this.state.query = query;
    this.state.page = 0;
    await this.runSearch();
  }

  async setMode(mode: Mode): Promise<void> {
    if (this.state.mode !== mode) {
      this.state.mode = mode;
      this.state.query = "";
      this.state.page = 0;
      this.results = null;
      this.error = null;
      this.onChange();
    }
  }

  async toggleFilter(field: string, value: string): Promise<void> {
    if (this.filterActive(field, value)) {
      this.state.filters = this.state.filters.filter(
        (f) => !(f.field === field && f.value === value),
      );
    } else {
      this.state.filters = [...this.state.filters, { field, value }];
    }
    this.state.page = 0;
    await this.runSearch();
  }

  async clearFilters(): Promise<void> {
    this.state.filters = [];
    this.state.page = 0;
    await this.runSearch();
  }

  async setPage(page: number): Promise<void> {
    this.state.page = Math.max(0, page);
    await this.runSearch();
  }

  /** Submit the builder's rows as the advanced query. No-op while empty. */
  async applyBuilder(): Promise<void> {
    const query = this.builderString();
    if (!query) {
      return;
    }
    this.state.mode = "advanced";
    this.state.query = query;
    this.state.page = 0;
    await this.runSearch();
  }

  async openDetail(id: string): Promise<void> {
    this.state.detail = id;
    const token = this.detailGate.next();
    try {
      const record = await this.api.dataset(id);
      if (!this.detailGate.isCurrent(token)) {
        return;
      }
      this.detailRecord = record;
      this.detailError = null;
    } catch (err) {
      if (!this.detailGate.isCurrent(token)) {
        return;
      }
      this.detailRecord = null;
      this.detailError = toUiError(err);
    }
    this.onChange();
  }

  closeDetail(): void {
    this.state.detail = null;
    this.detailRecord = null;
    this.detailError = null;
    this.onChange();
  }

  /** Rebuild the whole view from a URL query string (reload / back button). */
  async restore(queryString: string): Promise<void> {
    this.state = decodeState(queryString);
    await this.runSearch();
    if (this.state.detail) {
      await this.openDetail(this.state.detail);
    } else {
      this.detailRecord = null;
      this.detailError = null;
    }
  }
}
