// Typed client over the service HTTP API. Every mutation the UI performs
// goes through here; the client holds the bearer token and nothing else.

import { loginProof } from "./crypto.js";

export interface Receipt {
  tx_hash: string;
  block_height: number;
  fee_bnb: string;
  fee_usd: string;
  events: number[];
}

export interface Enrollment {
  receipt: Receipt;
  address: string;
  signing_key: string;
}

export interface Session {
  token: string;
  address: string;
  role: number | null;
  coaat_id: number | null;
  name: string | null;
  expires_in: number;
}

export interface DocumentEntry {
  svc: string;
  cid: string;
  version: string;
  timestamp: number;
}

export interface DossierEntry {
  dossier_id: string;
  seq: number;
  status: string;
  creator: string;
  document_count: number;
  created_at: number;
  decided_at: number | null;
  metadata?: string;
  documents?: DocumentEntry[];
}

export interface EventEntry {
  id: number;
  kind: string;
  dossier_id: string;
  audience_role: number;
  payload: { property: string; status: string };
}

export interface EventBatch {
  events: EventEntry[];
  next_since: number;
}

export interface DecisionResult {
  receipt: Receipt;
  dossier_id: string;
  status: string;
  reviews: { svc: string; cid: string }[];
}

export interface DocumentMeta {
  svc: string;
  cid: string;
  version: string;
  txHash: string;
  timestamp: number;
  uploader: string;
  dossierId: string;
  status: string;
  property: string;
}

export interface FeeSchedule {
  fees: Record<string, string>;
  usd_per_bnb: string;
}

/** A protocol rejection, carrying the contracts-level error name. */
export class ApiError extends Error {
  constructor(
    public override readonly name: string,
    public readonly detail: string,
    public readonly status: number,
  ) {
    super(detail ? `${name}: ${detail}` : name);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;

  constructor(
    public readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request(method: string, path: string, init: RequestInit = {}): Promise<Response> {
    const headers = new Headers(init.headers);
    if (this.token) headers.set("Authorization", `Bearer ${this.token}`);
    const resp = await this.fetchImpl(this.baseUrl + path, { ...init, method, headers });
    if (!resp.ok) {
      let name = `HTTP${resp.status}`;
      let detail = "";
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") {
          name = body.error;
          detail = String(body.detail ?? "");
        }
      } catch {
        // non-JSON error body; keep the status code name
      }
      throw new ApiError(name, detail, resp.status);
    }
    return resp;
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit =
      body === undefined
        ? {}
        : { body: JSON.stringify(body), headers: { "Content-Type": "application/json" } };
    const resp = await this.request(method, path, init);
    return (await resp.json()) as T;
  }

  // -- authentication ------------------------------------------------------

  async login(address: string, key: Uint8Array): Promise<Session> {
    const { nonce } = await this.json<{ nonce: string }>(
      "GET",
      `/auth/nonce?address=${encodeURIComponent(address)}`,
    );
    const proof = await loginProof(nonce, address, key);
    const session = await this.json<Session>("POST", "/auth/login", { address, nonce, proof });
    this.token = session.token;
    return session;
  }

  logout(): void {
    this.token = null;
  }

  // -- enrollment (used by operators and tests, not by the views) -----------

  kickoff(address: string): Promise<Enrollment> {
    return this.json("POST", "/kickoff", { address });
  }

  addCoaat(address: string, name: string): Promise<Enrollment> {
    return this.json("POST", "/coaats", { address, name });
  }

  addUser(address: string, role: number, name: string): Promise<Enrollment> {
    return this.json("POST", "/users", { address, role, name });
  }

  // -- properties and dossiers ----------------------------------------------

  registerProperty(ref: string, data: string): Promise<{ receipt: Receipt; cadastral_ref: string }> {
    return this.json("POST", "/properties", { cadastral_ref: ref, cadastral_data: data });
  }

  async listDossiers(ref: string): Promise<DossierEntry[]> {
    const body = await this.json<{ dossiers: DossierEntry[] }>(
      "GET",
      `/properties/${encodeURIComponent(ref)}/dossiers`,
    );
    return body.dossiers;
  }

  createDossier(ref: string, metadata: string): Promise<{ receipt: Receipt; dossier_id: string; seq: number }> {
    return this.json("POST", `/properties/${encodeURIComponent(ref)}/dossiers`, { metadata });
  }

  async reserveSvc(dossierId: string): Promise<string> {
    const body = await this.json<{ svc: string }>(
      "POST",
      `/dossiers/${encodeURIComponent(dossierId)}/svc`,
    );
    return body.svc;
  }

  uploadDocument(
    dossierId: string,
    body: Uint8Array,
    signatureHex: string,
    filename = "document.bin",
  ): Promise<{ receipt: Receipt; svc: string; cid: string }> {
    const form = new FormData();
    form.append("body", new Blob([body as BlobPart]), filename);
    form.append("signature", signatureHex);
    return this.request("POST", `/dossiers/${encodeURIComponent(dossierId)}/documents`, {
      body: form,
    }).then((r) => r.json());
  }

  submitDossier(dossierId: string): Promise<{ receipt: Receipt; dossier_id: string }> {
    return this.json("POST", `/dossiers/${encodeURIComponent(dossierId)}/submit`);
  }

  decideDossier(
    dossierId: string,
    decision: "validated" | "rejected",
    reviewed: { body: Uint8Array; signatureHex: string; name: string }[],
  ): Promise<DecisionResult> {
    const form = new FormData();
    form.append("decision", decision);
    for (const r of reviewed) {
      form.append("reviewed", new Blob([r.body as BlobPart]), r.name);
      form.append("signature", r.signatureHex);
    }
    return this.request("POST", `/dossiers/${encodeURIComponent(dossierId)}/decision`, {
      body: form,
    }).then((r) => r.json());
  }

  // -- documents and events --------------------------------------------------

  async fetchDocument(code: string): Promise<{ body: Uint8Array; meta: DocumentMeta }> {
    const resp = await this.request("GET", `/documents/${encodeURIComponent(code)}`);
    const body = new Uint8Array(await resp.arrayBuffer());
    const h = (name: string) => resp.headers.get(name) ?? "";
    return {
      body,
      meta: {
        svc: h("X-Coaat-Svc"),
        cid: h("X-Coaat-Cid"),
        version: h("X-Coaat-Version"),
        txHash: h("X-Coaat-Tx-Hash"),
        timestamp: Number(h("X-Coaat-Timestamp")),
        uploader: h("X-Coaat-Uploader"),
        dossierId: h("X-Coaat-Dossier"),
        status: h("X-Coaat-Status"),
        property: h("X-Coaat-Property"),
      },
    };
  }

  events(since: number, role?: number, wait = 0): Promise<EventBatch> {
    const params = new URLSearchParams({ since: String(since) });
    if (role !== undefined) params.set("role", String(role));
    if (wait > 0) params.set("wait", String(wait));
    return this.json("GET", `/events?${params}`);
  }

  // -- operator reads ----------------------------------------------------------

  feeSchedule(): Promise<FeeSchedule> {
    return this.json("GET", "/costs/schedule");
  }

  async chainDump(): Promise<string[]> {
    const body = await this.json<{ lines: string[] }>("GET", "/chain/dump");
    return body.lines;
  }

  chainAudit(): Promise<{ ok: boolean; first_corrupt_height: number | null; height: number }> {
    return this.json("GET", "/chain/audit");
  }
}
