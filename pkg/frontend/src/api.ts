/**
 * Thin typed client over the documented service endpoints.
 *
 * The dashboard performs no dose arithmetic: every figure it shows comes out
 * of one of these response objects untouched. API failures surface verbatim
 * so the operator sees exactly what the service said.
 */
import { AuthProvider, NoAuth } from "./auth.js";
import {
  CatalogResponse,
  ProfileResponse,
  RecordedResponse,
  StatusResponse,
  WhatIfResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: string,
    public pathQs: string,
  ) {
    super(`API ${status} on ${pathQs}: ${body}`);
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private auth: AuthProvider = new NoAuth(),
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, pathQs: string, body?: unknown): Promise<T> {
    const raw = body === undefined ? "" : JSON.stringify(body);
    const headers: Record<string, string> = await this.auth.headers(method, pathQs, raw);
    if (body !== undefined) {
      headers["content-type"] = "application/json";
    }
    const response = await this.fetchFn(this.base + pathQs, {
      method,
      headers,
      body: body === undefined ? undefined : raw,
    });
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, text, pathQs);
    }
    return JSON.parse(text) as T;
  }

  getStatus(): Promise<StatusResponse> {
    return this.request("GET", "/status");
  }

  getCatalog(): Promise<CatalogResponse> {
    return this.request("GET", "/catalog");
  }

  getProfile(patientId: string, asOf?: string, age?: number): Promise<ProfileResponse> {
    let pathQs = `/patients/${encodeURIComponent(patientId)}/profile`;
    const params = new URLSearchParams();
    if (asOf) params.set("as_of", asOf);
    if (age !== undefined) params.set("age", String(age));
    const qs = params.toString();
    if (qs) pathQs += `?${qs}`;
    return this.request("GET", pathQs);
  }

  postWhatIf(patientId: string, examType: string, asOf?: string): Promise<WhatIfResponse> {
    const body: Record<string, unknown> = { patient_id: patientId, exam_type: examType };
    if (asOf) body.as_of = asOf;
    return this.request("POST", "/whatif", body);
  }

  /** Recording is always an explicit second action after a what-if. */
  postCatalogInvestigation(
    patientId: string,
    examType: string,
    performedAt?: string,
  ): Promise<RecordedResponse> {
    const body: Record<string, unknown> = {
      raw: { type: "catalog", exam: examType },
      patient_id: patientId,
      exam_type: examType,
    };
    if (performedAt) body.performed_at = performedAt;
    return this.request("POST", "/investigations", body);
  }
}
