/**
 * Typed client for the node's HTTP API.
 *
 * Transaction bytes are never assembled here: the node's sign endpoint
 * returns the canonical encoding and submit() forwards that hex untouched.
 */

import type {
  AccountOut,
  AuctionDetail,
  AuctionRow,
  BondOut,
  HeadOut,
  LotTrace,
  ParamsOut,
  SignOut,
  SubmitOut,
  TxDoc,
  TxStatusOut,
  WalletEntry,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error envelope from the node: {code, message} with an HTTP status. */
export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function asApiError(res: Response): Promise<ApiError> {
  let code = `HTTP_${res.status}`;
  let message = res.statusText || "request failed";
  try {
    const body = (await res.json()) as { code?: string; message?: string; detail?: unknown };
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
    else if (body.detail !== undefined) message = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(code, message, res.status);
}

export class NodeApi {
  private readonly fetchFn: FetchLike;

  constructor(
    public readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) throw await asApiError(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await asApiError(res);
    return (await res.json()) as T;
  }

  head(): Promise<HeadOut> {
    return this.get("/v1/chain/head");
  }

  auctions(): Promise<AuctionRow[]> {
    return this.get("/v1/auctions");
  }

  auction(id: string): Promise<AuctionDetail> {
    return this.get(`/v1/auctions/${id}`);
  }

  account(address: string): Promise<AccountOut> {
    return this.get(`/v1/accounts/${address}`);
  }

  lotTrace(lotId: string): Promise<LotTrace> {
    return this.get(`/v1/lots/${lotId}/trace`);
  }

  bond(bondId: string): Promise<BondOut> {
    return this.get(`/v1/bonds/${bondId}`);
  }

  params(): Promise<ParamsOut> {
    return this.get("/v1/params");
  }

  wallets(): Promise<WalletEntry[]> {
    return this.get("/v1/wallets");
  }

  txStatus(txId: string): Promise<TxStatusOut> {
    return this.get(`/v1/tx/${txId}`);
  }

  sign(wallet: string, doc: TxDoc): Promise<SignOut> {
    return this.post(`/v1/wallet/${wallet}/sign`, doc);
  }

  submit(txHex: string): Promise<SubmitOut> {
    return this.post("/v1/tx", { hex: txHex });
  }

  /** Sign with the node wallet, then submit exactly the bytes it returned. */
  async signAndSubmit(wallet: string, doc: TxDoc): Promise<SignOut> {
    const signed = await this.sign(wallet, doc);
    await this.submit(signed.hex);
    return signed;
  }
}
