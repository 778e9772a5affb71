/** Thin client for the suggestion service's /v1 endpoints. */

export interface Suggestion {
  line: string;
  distance: number;
  rank: number;
}

export interface SuggestResponse {
  oov: boolean;
  suggestions: Suggestion[];
}

/** A non-2xx reply; status 422 means "nothing to suggest from this line". */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

export class SuggestClient {
  private baseUrl: string;

  constructor(
    baseUrl: string,
    private readonly fetchImpl: FetchLike = defaultFetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  setBaseUrl(url: string): void {
    this.baseUrl = url.replace(/\/+$/, "");
  }

  getBaseUrl(): string {
    return this.baseUrl;
  }

  async suggest(line: string, k = 10): Promise<SuggestResponse> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/suggest`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ line, k }),
    });
    if (!response.ok) {
      let message = `${response.status}`;
      try {
        const body = (await response.json()) as { error?: string };
        if (body.error) message = body.error;
      } catch {
        message = response.statusText || message;
      }
      throw new ApiError(response.status, message);
    }
    return (await response.json()) as SuggestResponse;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
