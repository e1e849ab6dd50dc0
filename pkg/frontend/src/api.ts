/** Typed client for the annotation service. Every request goes through one
 * of the five documented endpoints; nothing else is ever fetched. */

import type { AgreementDoc, EditDoc, ItemDetail, ItemSummary, SubmitResult } from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export interface ApiOptions {
  /** Injectable for tests; defaults to the global fetch. */
  fetchImpl?: typeof fetch;
  /** Static bearer token, when the service requires one. */
  token?: string;
}

export class AnnotationApi {
  private readonly fetchImpl: typeof fetch;
  private readonly headers: Record<string, string>;

  constructor(
    private readonly baseUrl: string,
    options: ApiOptions = {},
  ) {
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.headers = { 'Content-Type': 'application/json' };
    if (options.token) this.headers['Authorization'] = `Bearer ${options.token}`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: { ...this.headers, ...(init?.headers ?? {}) },
    });
    if (!response.ok) {
      let code = 'HTTP_ERROR';
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { error?: { code?: string; message?: string } };
        code = body.error?.code ?? code;
        message = body.error?.message ?? message;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  async listItems(): Promise<ItemSummary[]> {
    const body = await this.request<{ items: ItemSummary[] }>('/api/items');
    return body.items;
  }

  getItem(itemId: string): Promise<ItemDetail> {
    return this.request<ItemDetail>(`/api/items/${encodeURIComponent(itemId)}`);
  }

  submitEdits(itemId: string, version: number, edits: EditDoc[]): Promise<SubmitResult> {
    return this.request<SubmitResult>(`/api/items/${encodeURIComponent(itemId)}/edits`, {
      method: 'POST',
      body: JSON.stringify({ version, edits }),
    });
  }

  getAgreement(itemId: string): Promise<AgreementDoc> {
    return this.request<AgreementDoc>(`/api/items/${encodeURIComponent(itemId)}/agreement`);
  }

  async exportGraph(itemId: string): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/items/${encodeURIComponent(itemId)}/export`, {
      headers: this.headers,
    });
    if (!response.ok) throw new ApiError(response.status, 'HTTP_ERROR', `HTTP ${response.status}`);
    return response.text();
  }
}
