// Client core: the signaling state machine behind the UI.
//
// The session view is a pure render of server messages. In particular the
// card index is only ever set from an incoming CARD_STATE; a teacher
// pressing "next" sends CARD_ADVANCE and waits for the fan-out like any
// other peer, so both sides always display the same card.

import type { Transport } from "./transport.js";
import {
  decode,
  encode,
  type Envelope,
  type LessonCard,
  type MessageType,
  type PayloadOf,
  type Role,
  type RosterUser,
} from "./protocol.js";

export type PendingInvite = {
  invitationId: string;
  from: string;
  language: string;
  level: string;
  recipientRole: Role;
};

export type SessionView = {
  sessionId: string;
  myRole: Role;
  peer: string;
  lessonId: string;
  cardIndex: number | null; // null until the first CARD_STATE arrives
  card: LessonCard | null;
  myPrompt: string;
};

export type SessionEndInfo = {
  sessionId: string;
  cause: string;
  billedS: number;
  durationS: number;
  myRatingSent: boolean;
};

export type WireError = { code: string; detail: string; refSeq: number };

type Events = {
  authed: { userId: string; balanceS: number };
  roster: RosterUser[];
  invite: PendingInvite;
  inviteClosed: { invitationId: string; state: string };
  sessionStarted: SessionView;
  card: SessionView;
  sessionEnded: SessionEndInfo;
  balance: number;
  error: WireError;
  closed: void;
  rtc: Envelope<"RTC_OFFER" | "RTC_ANSWER" | "RTC_ICE">;
};

type Handler<K extends keyof Events> = (data: Events[K]) => void;

export class LingoClient {
  userId: string | null = null;
  balanceS = 0;
  nativeLanguage: string;
  pendingInvite: PendingInvite | null = null;
  sentInviteIds = new Set<string>();
  session: SessionView | null = null;
  lastEnd: SessionEndInfo | null = null;

  private seq = 0;
  private handlers: { [K in keyof Events]?: Array<Handler<K>> } = {};

  constructor(
    private transport: Transport,
    options: { nativeLanguage: string },
  ) {
    this.nativeLanguage = options.nativeLanguage;
    transport.onMessage((text) => this.handle(text));
    transport.onClose(() => this.emit("closed", undefined));
  }

  on<K extends keyof Events>(event: K, handler: Handler<K>): void {
    const list = (this.handlers[event] ??= []) as Array<Handler<K>>;
    list.push(handler);
  }

  private emit<K extends keyof Events>(event: K, data: Events[K]): void {
    for (const handler of this.handlers[event] ?? []) handler(data);
  }

  private send<T extends MessageType>(type: T, payload: PayloadOf<T>): void {
    this.seq += 1;
    this.transport.send(encode({ v: 1, type, seq: this.seq, payload }));
  }

  // -- outbound actions ----------------------------------------------------

  auth(token: string): void {
    this.send("AUTH", { token });
  }

  setPresence(status: "ONLINE" | "OFFLINE", roles: Role[]): void {
    this.send("PRESENCE", { status, roles });
  }

  requestRoster(language: string, roleSought: Role): void {
    this.send("ROSTER_REQ", { language, role_sought: roleSought });
  }

  sendInvite(to: string, recipientRole: Role, language: string, level: string): void {
    this.send("INVITE", { to, recipient_role: recipientRole, language, level });
  }

  respondInvite(decision: "ACCEPT" | "REJECT"): void {
    if (this.pendingInvite === null) return;
    this.send("INVITE_RESULT", {
      invitation_id: this.pendingInvite.invitationId,
      decision,
    });
    if (decision === "REJECT") this.pendingInvite = null;
  }

  /** Teacher control. Sends the request only; the view moves on CARD_STATE. */
  advanceCard(toIndex: number): void {
    if (this.session === null) return;
    this.send("CARD_ADVANCE", {
      session_id: this.session.sessionId,
      to_index: toIndex,
    });
  }

  endSession(): void {
    if (this.session === null) return;
    this.send("SESSION_END", { session_id: this.session.sessionId });
  }

  rate(stars: number): void {
    if (this.lastEnd === null || this.lastEnd.myRatingSent) return;
    this.send("RATE", { session_id: this.lastEnd.sessionId, stars });
    this.lastEnd.myRatingSent = true;
  }

  sendRtc(
    type: "RTC_OFFER" | "RTC_ANSWER" | "RTC_ICE",
    payload: Record<string, unknown> & { session_id: string },
  ): void {
    this.send(type, payload as PayloadOf<"RTC_OFFER">);
  }

  get balanceMinutes(): number {
    return Math.floor(this.balanceS / 60);
  }

  // -- inbound dispatch -------------------------------------------------------

  private handle(text: string): void {
    const envelope = decode(text);
    switch (envelope.type) {
      case "AUTH_OK": {
        const payload = envelope.payload as PayloadOf<"AUTH_OK">;
        this.userId = payload.user_id;
        this.balanceS = payload.balance_s;
        this.emit("authed", { userId: payload.user_id, balanceS: payload.balance_s });
        this.emit("balance", this.balanceS);
        break;
      }
      case "ROSTER":
        this.emit("roster", (envelope.payload as PayloadOf<"ROSTER">).users);
        break;
      case "INVITE": {
        const payload = envelope.payload as PayloadOf<"INVITE">;
        if (payload.from !== undefined && payload.from === this.userId) {
          // correlation echo for an invite we sent
          if (payload.invitation_id) this.sentInviteIds.add(payload.invitation_id);
          break;
        }
        this.pendingInvite = {
          invitationId: payload.invitation_id ?? "",
          from: payload.from ?? "",
          language: payload.language,
          level: payload.level,
          recipientRole: payload.recipient_role,
        };
        this.emit("invite", this.pendingInvite);
        break;
      }
      case "INVITE_RESULT":
        this.handleInviteResult(envelope.payload as PayloadOf<"INVITE_RESULT">);
        break;
      case "CARD_STATE": {
        const payload = envelope.payload as PayloadOf<"CARD_STATE">;
        if (this.session === null || this.session.sessionId !== payload.session_id) {
          break;
        }
        this.session.cardIndex = payload.card_index;
        this.session.card = payload.card;
        this.session.myPrompt = this.promptFor(payload.card);
        this.emit("card", this.session);
        break;
      }
      case "SESSION_END": {
        const payload = envelope.payload as PayloadOf<"SESSION_END">;
        if (this.session === null || this.session.sessionId !== payload.session_id) {
          break;
        }
        this.lastEnd = {
          sessionId: payload.session_id,
          cause: payload.cause ?? "HANGUP",
          billedS: payload.billed_s ?? 0,
          durationS: payload.duration_s ?? 0,
          myRatingSent: false,
        };
        this.session = null;
        this.emit("sessionEnded", this.lastEnd);
        break;
      }
      case "RTC_OFFER":
      case "RTC_ANSWER":
      case "RTC_ICE":
        this.emit("rtc", envelope as Envelope<"RTC_OFFER">);
        break;
      case "ERROR": {
        const payload = envelope.payload as PayloadOf<"ERROR">;
        this.emit("error", {
          code: payload.code,
          detail: payload.detail,
          refSeq: payload.ref_seq,
        });
        break;
      }
      default:
        break; // client-to-server types never arrive inbound
    }
  }

  private handleInviteResult(payload: PayloadOf<"INVITE_RESULT">): void {
    const state = payload.state ?? "";
    if (state === "ACCEPTED" && payload.session_id && payload.role) {
      this.session = {
        sessionId: payload.session_id,
        myRole: payload.role,
        peer: payload.peer ?? "",
        lessonId: payload.lesson_id ?? "",
        cardIndex: null,
        card: null,
        myPrompt: "",
      };
      this.pendingInvite = null;
      this.sentInviteIds.delete(payload.invitation_id);
      this.emit("sessionStarted", this.session);
      return;
    }
    // terminal without a session: a dialog (ours or theirs) closes
    if (this.pendingInvite?.invitationId === payload.invitation_id) {
      this.pendingInvite = null;
    }
    this.sentInviteIds.delete(payload.invitation_id);
    this.emit("inviteClosed", { invitationId: payload.invitation_id, state });
  }

  private promptFor(card: LessonCard): string {
    if (this.session === null) return "";
    const prompts =
      this.session.myRole === "TEACHER" ? card.teacher_prompt : card.student_prompt;
    // the participant's own language when available, any entry otherwise
    return (
      prompts[this.nativeLanguage] ??
      prompts["en"] ??
      Object.values(prompts)[0] ??
      ""
    );
  }
}
