import type { ApiClient, FeeSchedule, Session } from "./api.js";

/** Everything a view needs: the API client (which holds the token), the
 * logged-in session, the signing key for client-side stamping, the fee
 * schedule for pre-confirmation hints, and the shared flash banner. */
export interface Ctx {
  api: ApiClient;
  session: Session;
  key: Uint8Array;
  schedule: FeeSchedule | null;
  flash: (message: string, kind?: "info" | "error") => void;
}

export function feeHint(ctx: Ctx, kind: string): string {
  const fee = ctx.schedule?.fees[kind];
  return fee === undefined ? "" : `fee ${fee} BNB`;
}

/** Wrap an async handler so protocol rejections land in the banner with
 * their contracts-level name instead of an unhandled rejection. */
export function guarded(ctx: Ctx, fn: () => Promise<void>): () => void {
  return () => {
    fn().catch((err) => {
      const msg = err instanceof Error ? err.message : String(err);
      ctx.flash(msg, "error");
    });
  };
}
