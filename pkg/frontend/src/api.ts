/** Thin client for the generation service; fetch is injectable for tests. */

import type { GenerationRequest, GenerationResponse, ServiceMeta } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

export class GenServeClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init)
  ) {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const detail = typeof body?.detail === "string" ? body.detail : JSON.stringify(body);
      throw new ServiceError(response.status, detail);
    }
    return body as T;
  }

  health(): Promise<{ status: string; model_level: number; checkpoint_hash: string }> {
    return this.requestJson("/health");
  }

  meta(): Promise<ServiceMeta> {
    return this.requestJson("/meta");
  }

  generate(request: GenerationRequest): Promise<GenerationResponse> {
    return this.requestJson("/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }
}
