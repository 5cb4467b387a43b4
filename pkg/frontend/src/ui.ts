// DOM layer: renders the client core's state into screens and dialogs.

import type { Api } from "./api.js";
import type { LingoClient, PendingInvite, SessionEndInfo, SessionView } from "./client.js";
import { FunnelDialog, type FunnelVariant } from "./funnel.js";
import type { RosterUser, Role } from "./protocol.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export class Ui {
  private root: HTMLElement;
  private balanceBadge: HTMLElement;
  private funnelVariant: FunnelVariant = "A";

  constructor(
    root: HTMLElement,
    private client: LingoClient,
    private api: Api,
  ) {
    this.root = root;
    this.balanceBadge = el("span", { class: "balance" }, "");
    client.on("balance", () => this.renderBalance());
    client.on("invite", (invite) => this.showInviteDialog(invite));
    client.on("inviteClosed", () => this.closeDialog("invite-dialog"));
    client.on("sessionStarted", (view) => this.showSession(view));
    client.on("card", (view) => this.renderCard(view));
    client.on("sessionEnded", (end) => this.showSessionOver(end));
    client.on("roster", (users) => this.renderRoster(users));
    client.on("error", (err) => this.toast(`${err.code}: ${err.detail}`));
  }

  setFunnelVariant(variant: FunnelVariant): void {
    this.funnelVariant = variant;
  }

  private swap(...nodes: Array<Node | string>): void {
    this.root.replaceChildren(
      el("header", {}, el("h1", {}, "lingobank"), this.balanceBadge),
      ...nodes,
    );
  }

  private renderBalance(): void {
    this.balanceBadge.textContent = `${this.client.balanceMinutes} min`;
  }

  private toast(message: string): void {
    const note = el("div", { class: "toast" }, message);
    this.root.append(note);
    setTimeout(() => note.remove(), 4000);
  }

  private closeDialog(id: string): void {
    document.getElementById(id)?.remove();
  }

  // -- roster screen ------------------------------------------------------

  showRosterScreen(learningLanguage: string): void {
    const seek = el("button", { class: "primary" }, `Learn ${learningLanguage}`);
    seek.onclick = () => this.client.requestRoster(learningLanguage, "TEACHER");
    const teach = el("button", {}, "Teach my language");
    teach.onclick = () =>
      this.client.requestRoster(this.client.nativeLanguage, "STUDENT");
    this.swap(
      el("section", { class: "roster-screen" },
        el("div", { class: "actions" }, seek, teach),
        el("ul", { id: "roster", class: "roster" })),
    );
    this.renderBalance();
  }

  private renderRoster(users: RosterUser[]): void {
    const list = document.getElementById("roster");
    if (list === null) return;
    list.replaceChildren();
    if (users.length === 0) {
      list.append(el("li", { class: "empty" }, "Nobody is available right now."));
      return;
    }
    for (const user of users) {
      const stars = user.rating_avg === null ? "unrated" : `★ ${user.rating_avg.toFixed(1)}`;
      const invite = el("button", {}, "Invite");
      invite.onclick = () =>
        this.client.sendInvite(user.user_id, "TEACHER", user.native_language, "A1");
      list.append(
        el("li", {},
          el("span", { class: "who" }, `${user.user_id} (${user.native_language}) ${stars}`),
          invite),
      );
    }
  }

  // -- incoming invite dialog ------------------------------------------------

  private showInviteDialog(invite: PendingInvite): void {
    this.closeDialog("invite-dialog");
    const accept = el("button", { class: "primary" }, "Accept");
    accept.onclick = () => {
      this.client.respondInvite("ACCEPT");
      this.closeDialog("invite-dialog");
    };
    const reject = el("button", {}, "Reject");
    reject.onclick = () => {
      this.client.respondInvite("REJECT");
      this.closeDialog("invite-dialog");
    };
    const verb = invite.recipientRole === "TEACHER" ? "teach" : "learn";
    this.root.append(
      el("div", { id: "invite-dialog", class: "dialog" },
        el("p", {},
          `${invite.from} asks you to ${verb} ${invite.language} ` +
          `(lesson level ${invite.level}).`),
        el("div", { class: "actions" }, accept, reject)),
    );
  }

  // -- session screen -----------------------------------------------------------

  private showSession(view: SessionView): void {
    this.closeDialog("invite-dialog");
    const end = el("button", { class: "danger" }, "End lesson");
    end.onclick = () => this.client.endSession();
    const controls: HTMLElement[] = [end];
    if (view.myRole === "TEACHER") {
      const back = el("button", {}, "◀ card");
      back.onclick = () => {
        if (view.cardIndex !== null && view.cardIndex > 0) {
          this.client.advanceCard(view.cardIndex - 1);
        }
      };
      const next = el("button", { class: "primary" }, "card ▶");
      next.onclick = () => {
        if (view.cardIndex !== null) this.client.advanceCard(view.cardIndex + 1);
      };
      controls.unshift(back, next);
    }
    this.swap(
      el("section", { class: "session" },
        el("div", { class: "videos" },
          el("video", { id: "remote-video", autoplay: "", playsinline: "" }),
          el("video", { id: "local-video", autoplay: "", muted: "", playsinline: "" })),
        el("div", { class: "card-pane" },
          el("p", { class: "peer" }, `${view.myRole === "TEACHER" ? "Student" : "Teacher"}: ${view.peer}`),
          el("div", { id: "card-content", class: "card-content" }, "…"),
          el("div", { id: "card-prompt", class: "card-prompt" }, "")),
        el("div", { class: "actions" }, ...controls)),
    );
  }

  private renderCard(view: SessionView): void {
    const content = document.getElementById("card-content");
    const prompt = document.getElementById("card-prompt");
    if (content === null || prompt === null || view.card === null) return;
    content.textContent = `${(view.cardIndex ?? 0) + 1}. ${view.card.content}`;
    prompt.textContent = view.myPrompt;
  }

  attachStreams(local: MediaProvider | null, remote: MediaProvider | null): void {
    const localVideo = document.getElementById("local-video") as HTMLVideoElement | null;
    const remoteVideo = document.getElementById("remote-video") as HTMLVideoElement | null;
    if (localVideo && local) localVideo.srcObject = local;
    if (remoteVideo && remote) remoteVideo.srcObject = remote;
  }

  // -- session end: ratings, then the invite-a-friend funnel ---------------------

  private showSessionOver(end: SessionEndInfo): void {
    const stars = el("div", { class: "stars" });
    for (let n = 1; n <= 5; n += 1) {
      const star = el("button", { class: "star" }, "★".repeat(n));
      star.onclick = () => {
        this.client.rate(n);
        this.closeDialog("rating-dialog");
        this.showFunnelDialog();
      };
      stars.append(star);
    }
    const causeLine =
      end.cause === "DISCONNECT"
        ? "Your partner's connection was lost."
        : end.cause === "BALANCE_EXHAUSTED"
          ? "You ran out of minutes."
          : "Lesson finished.";
    this.swap(
      el("section", { class: "session-over" },
        el("p", {}, `${causeLine} ${Math.round(end.billedS / 60)} minutes billed.`),
        el("div", { id: "rating-dialog", class: "dialog" },
          el("p", {}, "How was your partner?"), stars)),
    );
    void this.refreshBalance();
  }

  private async refreshBalance(): Promise<void> {
    if (this.client.userId === null) return;
    const balance = await this.api.balance(this.client.userId);
    this.client.balanceS = balance.balance_s;
    this.renderBalance();
  }

  showFunnelDialog(): void {
    const userId = this.client.userId;
    if (userId === null) return;
    const dialog = new FunnelDialog(this.funnelVariant, (action) => {
      void this.api.reportFunnel(userId, this.funnelVariant, action);
    });
    const help = el("button", { class: "primary" }, "Help the project — invite friends");
    help.onclick = () => {
      dialog.invite();
      void this.api.reportFriendInvites(userId, 1);
      this.closeDialog("funnel-dialog");
      this.toast("Thank you! Your invite link is copied.");
    };
    const children: HTMLElement[] = [
      el("p", {},
        "Help the project grow: invite a friend and earn 30 bonus minutes " +
        "when they join."),
      el("div", { class: "actions" }, help),
    ];
    if (dialog.canDismiss) {
      const cross = el("button", { class: "close-cross", title: "Close" }, "✕");
      cross.onclick = () => {
        dialog.dismiss();
        this.closeDialog("funnel-dialog");
      };
      children.unshift(cross);
    } else {
      const decline = el("button", {}, "I would not like to help");
      decline.onclick = () => {
        dialog.decline();
        this.closeDialog("funnel-dialog");
      };
      (children[1] as HTMLElement).append(decline);
    }
    this.root.append(el("div", { id: "funnel-dialog", class: "dialog" }, ...children));
  }

  // -- purchase dialog ---------------------------------------------------------

  showPurchaseDialog(): void {
    const buy = el("button", { class: "primary" }, "Buy 30 minutes");
    buy.onclick = async () => {
      if (this.client.userId === null) return;
      await this.api.purchase(this.client.userId, 1800, `web-${Date.now()}`);
      await this.refreshBalance();
      this.closeDialog("purchase-dialog");
      this.toast("30 minutes added.");
    };
    const cancel = el("button", {}, "Not now");
    cancel.onclick = () => this.closeDialog("purchase-dialog");
    this.root.append(
      el("div", { id: "purchase-dialog", class: "dialog" },
        el("p", {}, "Out of minutes? Teach to earn more, or purchase them."),
        el("div", { class: "actions" }, buy, cancel)),
    );
  }
}
