// Thin REST client for everything the signaling channel does not carry:
// registration, profile/balance reads, funnel instrumentation, purchases.

export type Profile = {
  user_id: string;
  native_language: string;
  learning_language: string;
  rating_avg: number | null;
  balance_s: number;
  funnel_variant: "A" | "B";
};

export type Registration = {
  user_id: string;
  token: string;
  balance_s: number;
  funnel_variant: "A" | "B";
};

export type FunnelAction = "SHOWN" | "INVITED" | "DISMISSED" | "DECLINED";

type FetchLike = typeof fetch;

export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string, detail: string) {
    super(detail);
  }
}

export class Api {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 204) return undefined as T;
    const data = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, data.code ?? "HTTP", data.detail ?? "");
    }
    return data as T;
  }

  register(
    userId: string,
    nativeLanguage: string,
    learningLanguage: string,
    invitedBy?: string,
  ): Promise<Registration> {
    return this.call("POST", "/api/users", {
      user_id: userId,
      native_language: nativeLanguage,
      learning_language: learningLanguage,
      invited_by: invitedBy ?? null,
    });
  }

  profile(userId: string): Promise<Profile> {
    return this.call("GET", `/api/users/${encodeURIComponent(userId)}/profile`);
  }

  balance(userId: string): Promise<{ user_id: string; balance_s: number; balance_min: number }> {
    return this.call("GET", `/api/users/${encodeURIComponent(userId)}/balance`);
  }

  reportFunnel(userId: string, variant: "A" | "B", action: FunnelAction): Promise<void> {
    return this.call("POST", "/api/funnel", {
      user_id: userId,
      variant,
      action,
    });
  }

  reportFriendInvites(userId: string, count: number): Promise<void> {
    return this.call("POST", "/api/friend-invites", { user_id: userId, count });
  }

  purchase(userId: string, amountS: number, paymentRef: string): Promise<unknown> {
    return this.call("POST", "/api/purchases", {
      user_id: userId,
      amount_s: amountS,
      payment_ref: paymentRef,
    });
  }
}
