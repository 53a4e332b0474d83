/** Thin typed client for the review service HTTP API.
 *
 * Every interaction with the pipeline goes through these five endpoints;
 * there is no other channel. Failures split into two kinds the session cares
 * about: ApiError (the server answered with a non-2xx status) and
 * NetworkError (the request never completed).
 */

import type {
  QueueItemView,
  RecordView,
  StatusView,
  VerdictBody,
} from "./types.js";

export const TOKEN_HEADER = "x-reviewer-token";

export interface HttpResponse {
  status: number;
  json(): Promise<unknown>;
}

export interface RequestInitLike {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (
  url: string,
  init?: RequestInitLike,
) => Promise<HttpResponse>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`request failed: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

async function errorMessage(response: HttpResponse): Promise<string> {
  try {
    const body = (await response.json()) as { error?: unknown };
    if (body && typeof body.error === "string") {
      return body.error;
    }
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  return `server returned ${response.status}`;
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    private readonly token: string | null = null,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl =
      fetchImpl ?? (globalThis.fetch as unknown as FetchLike);
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const headers = { ...extra };
    if (this.token !== null) {
      headers[TOKEN_HEADER] = this.token;
    }
    return headers;
  }

  private async request(
    path: string,
    init?: RequestInitLike,
  ): Promise<HttpResponse> {
    let response: HttpResponse;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (response.status >= 400) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return response;
  }

  async status(): Promise<StatusView> {
    const response = await this.request("/status", {
      headers: this.headers(),
    });
    return (await response.json()) as StatusView;
  }

  /** Lease the next pending item, or null when the queue is drained (204). */
  async queueNext(reviewer: string): Promise<QueueItemView | null> {
    const query = new URLSearchParams({ reviewer }).toString();
    const response = await this.request(`/queue/next?${query}`, {
      headers: this.headers(),
    });
    if (response.status === 204) {
      return null;
    }
    return (await response.json()) as QueueItemView;
  }

  async submitVerdict(
    imageId: string,
    body: VerdictBody,
  ): Promise<QueueItemView> {
    const response = await this.request(
      `/queue/${encodeURIComponent(imageId)}/verdict`,
      {
        method: "POST",
        headers: this.headers({ "content-type": "application/json" }),
        body: JSON.stringify(body),
      },
    );
    return (await response.json()) as QueueItemView;
  }

  async record(imageId: string): Promise<RecordView> {
    const response = await this.request(
      `/records/${encodeURIComponent(imageId)}`,
      { headers: this.headers() },
    );
    return (await response.json()) as RecordView;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${encodeURIComponent(imageId)}`;
  }
}
