// Typed client for the assortplan HTTP API. The UI never computes anything
// itself; every number it shows comes from these documents.

export interface FrameDoc {
  action: string;
  dataset: string | null;
  model: string | null;
  cardinality: number | null;
  include: number[];
  exclude: number[];
}

export interface ProductRow {
  id: number;
  name: string;
  price: number;
  choice_probability: number;
}

export interface ResultDoc {
  assortment: number[];
  revenue: number;
  probabilities: Record<string, number>;
  iterations: number;
  algorithm: string;
  products?: ProductRow[];
}

export interface ErrorDoc {
  code: string;
  message: string;
  offending_field: string | null;
}

export interface PlannerReplyDoc {
  reply_text: string;
  result: ResultDoc | null;
  frame: FrameDoc;
  error: ErrorDoc | null;
}

export interface HistoryTurnDoc {
  role: string;
  text: string;
  timestamp: number;
}

export interface DatasetDoc {
  dataset_id: string;
  product_count: number;
  available_models: string[];
  source_path: string;
}

/** Server answered with an error document (4xx/5xx). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/** The request never produced a response (connection refused, DNS, ...). */
export class NetworkError extends Error {}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) {
      let code = `HTTP_${response.status}`;
      let message = response.statusText;
      try {
        const doc = (await response.json()) as ErrorDoc;
        if (doc && doc.code) {
          code = doc.code;
          message = doc.message;
        }
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  async createSession(): Promise<string> {
    const doc = await this.request<{ session_id: string }>("POST", "/v1/sessions");
    return doc.session_id;
  }

  sendMessage(sessionId: string, text: string): Promise<PlannerReplyDoc> {
    return this.request<PlannerReplyDoc>("POST", `/v1/sessions/${sessionId}/messages`, { text });
  }

  history(sessionId: string): Promise<HistoryTurnDoc[]> {
    return this.request<HistoryTurnDoc[]>("GET", `/v1/sessions/${sessionId}/history`);
  }

  datasets(): Promise<DatasetDoc[]> {
    return this.request<DatasetDoc[]>("GET", "/v1/datasets");
  }
}
