// Typed client for the gateway's documented HTTP surface. The console knows
// nothing about individual queries: everything flows from /catalog/queries.

export interface CatalogParam {
  name: string;
  kind: string;
}

export interface CatalogEntry {
  query_id: string;
  description: string;
  params: CatalogParam[];
  url_path: string;
}

export interface TokenGrant {
  token: string;
  expires_at: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`backend unreachable: ${String(cause)}`);
  }
}

async function requestJson<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new NetworkError(err);
  }
  if (!resp.ok) {
    let code = "internal_error";
    let message = `HTTP ${resp.status}`;
    try {
      const body = (await resp.json()) as { code?: string; message?: string };
      if (body.code) code = body.code;
      if (body.message) message = body.message;
    } catch {
      // non-JSON error body: keep the fallback envelope
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class GatewayClient {
  private authTokenUrl: string | null = null;

  constructor(readonly catalogBaseUrl: string) {}

  // workflow step 1: discover the auth endpoint from the web-facing service
  async entrypoints(): Promise<string> {
    if (this.authTokenUrl === null) {
      const doc = await requestJson<{ auth_token_url: string }>(
        `${this.catalogBaseUrl}/catalog/entrypoints`,
      );
      this.authTokenUrl = doc.auth_token_url;
    }
    return this.authTokenUrl;
  }

  // step 2: exchange credentials for a bearer token
  async login(username: string, password: string): Promise<TokenGrant> {
    const url = await this.entrypoints();
    return requestJson<TokenGrant>(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ username, password }),
    });
  }

  // step 3: the role-filtered catalog
  async catalog(token: string): Promise<CatalogEntry[]> {
    return requestJson<CatalogEntry[]>(`${this.catalogBaseUrl}/catalog/queries`, {
      headers: { Authorization: `Bearer ${token}` },
    });
  }

  // step 4: run one query against its resource service
  async runQuery(
    token: string,
    entry: CatalogEntry,
    values: Record<string, string>,
    format: "json" | "xml",
  ): Promise<string> {
    const target = new URL(entry.url_path, this.catalogBaseUrl);
    for (const [key, value] of Object.entries(values)) {
      target.searchParams.set(key, value);
    }
    target.searchParams.set("format", format);

    let resp: Response;
    try {
      resp = await fetch(target.toString(), {
        headers: { Authorization: `Bearer ${token}` },
      });
    } catch (err) {
      throw new NetworkError(err);
    }
    if (!resp.ok) {
      let code = "internal_error";
      let message = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { code?: string; message?: string };
        if (body.code) code = body.code;
        if (body.message) message = body.message;
      } catch {
        // fall through with the envelope defaults
      }
      throw new ApiError(resp.status, code, message);
    }
    return resp.text();
  }
}

// The 422 body names the offending parameter inside the message text.
export function blockedParamFrom(error: ApiError): string | null {
  const match = /parameter '([^']+)'/.exec(error.message);
  return match ? match[1] : null;
}
