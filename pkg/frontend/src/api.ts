import type {
  DatasetRecord,
  FieldsResponse,
  Filter,
  QueryResponse,
  SourceEntry,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public position?: number,
  ) {
    super(message);
  }
}

export interface SearchParams {
  q?: string;
  advancedQuery?: string;
  filters?: Filter[];
  from?: number;
  size?: number;
  facetSize?: number;
  facets?: string[];
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  let position: number | undefined;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string; position?: number } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      position = body.error.position;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message, position);
}

/** Thin typed client for the portal API; the UI never computes results itself. */
export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async get<T>(path: string, params?: URLSearchParams): Promise<T> {
    const query = params && [...params].length ? `?${params.toString()}` : "";
    const response = await fetch(`${this.baseUrl}${path}${query}`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  async search(params: SearchParams): Promise<QueryResponse> {
    const qs = new URLSearchParams();
    if (params.advancedQuery !== undefined) {
      qs.set("advanced_query", params.advancedQuery);
    } else {
      qs.set("q", params.q ?? "");
    }
    for (const filter of params.filters ?? []) {
      qs.append("filters", `${filter.field}:${filter.value}`);
    }
    if (params.from) qs.set("from", String(params.from));
    if (params.size) qs.set("size", String(params.size));
    if (params.facetSize) qs.set("facet_size", String(params.facetSize));
    if (params.facets) qs.set("facets", params.facets.join(","));
    return this.get<QueryResponse>("/v1/query", qs);
  }

  async dataset(id: string): Promise<DatasetRecord> {
    const body = await this.get<{ record: DatasetRecord }>(`/v1/dataset/${encodeURIComponent(id)}`);
    return body.record;
  }

  async sources(): Promise<SourceEntry[]> {
    const body = await this.get<{ sources: SourceEntry[] }>("/v1/sources");
    return body.sources;
  }

  async fields(): Promise<FieldsResponse> {
    return this.get<FieldsResponse>("/v1/fields");
  }
}
