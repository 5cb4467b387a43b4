// Invite-a-friend dialog model. Variant A is closable (a window cross);
// variant B removes the cross so the only way out is the explicit
// "I would not like to help" button. Opening reports SHOWN; every dialog
// resolves with exactly one outcome event, silent dismissal impossible.

import type { FunnelAction } from "./api.js";

export type FunnelVariant = "A" | "B";

export class FunnelDialog {
  private outcome: FunnelAction | null = null;

  constructor(
    readonly variant: FunnelVariant,
    private report: (action: FunnelAction) => void,
  ) {
    this.report("SHOWN");
  }

  /** Variant A renders a close cross; variant B must not. */
  get canDismiss(): boolean {
    return this.variant === "A";
  }

  get resolved(): boolean {
    return this.outcome !== null;
  }

  get result(): FunnelAction | null {
    return this.outcome;
  }

  private resolve(action: FunnelAction): void {
    if (this.outcome !== null) {
      throw new Error(`dialog already resolved as ${this.outcome}`);
    }
    this.outcome = action;
    this.report(action);
  }

  invite(): void {
    this.resolve("INVITED");
  }

  /** The explicit decline button; only variant B offers one. */
  decline(): void {
    if (this.variant !== "B") {
      throw new Error("variant A has no decline button");
    }
    this.resolve("DECLINED");
  }

  /** The window-closing cross; absent in variant B. */
  dismiss(): void {
    if (!this.canDismiss) {
      throw new Error("variant B has no close cross");
    }
    this.resolve("DISMISSED");
  }
}
