import { describe, expect, it } from "vitest";

import type { FunnelAction } from "../src/api.js";
import { FunnelDialog } from "../src/funnel.js";

function tracked(variant: "A" | "B") {
  const events: FunnelAction[] = [];
  const dialog = new FunnelDialog(variant, (action) => events.push(action));
  return { dialog, events };
}

describe("invite-a-friend funnel dialogs", () => {
  it("reports SHOWN when opened", () => {
    const { events } = tracked("A");
    expect(events).toEqual(["SHOWN"]);
  });

  it("variant A: close cross produces DISMISSED", () => {
    const { dialog, events } = tracked("A");
    expect(dialog.canDismiss).toBe(true);
    dialog.dismiss();
    expect(events).toEqual(["SHOWN", "DISMISSED"]);
  });

  it("variant A has no explicit decline button", () => {
    const { dialog } = tracked("A");
    expect(() => dialog.decline()).toThrow(/no decline button/);
  });

  it("variant B: no close path other than the explicit decline", () => {
    const { dialog, events } = tracked("B");
    expect(dialog.canDismiss).toBe(false);
    expect(() => dialog.dismiss()).toThrow(/no close cross/);
    dialog.decline();
    expect(events).toEqual(["SHOWN", "DECLINED"]);
  });

  it("helping emits INVITED on either variant", () => {
    for (const variant of ["A", "B"] as const) {
      const { dialog, events } = tracked(variant);
      dialog.invite();
      expect(events).toEqual(["SHOWN", "INVITED"]);
    }
  });

  it("every dialog resolves exactly once", () => {
    const { dialog, events } = tracked("B");
    dialog.invite();
    expect(() => dialog.invite()).toThrow(/already resolved/);
    expect(() => dialog.decline()).toThrow(/already resolved/);
    expect(events.filter((a) => a !== "SHOWN")).toHaveLength(1);
  });
});
