// Wire codec for the signaling channel: one JSON envelope per text frame,
// mirrored from the server's protocol reference (docs/protocol.md).

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

export type Role = "TEACHER" | "STUDENT";

const role = z.enum(["TEACHER", "STUDENT"]);

const rosterUser = z.object({
  user_id: z.string(),
  native_language: z.string(),
  learning_language: z.string(),
  rating_avg: z.number().nullable(),
  since: z.number(),
});
export type RosterUser = z.infer<typeof rosterUser>;

const card = z.object({
  index: z.number().int(),
  content: z.string(),
  student_prompt: z.record(z.string(), z.string()),
  teacher_prompt: z.record(z.string(), z.string()),
});
export type LessonCard = z.infer<typeof card>;

// RTC payloads stay opaque beyond the routing field: passthrough keeps
// whatever the peer's media stack put there.
const rtcPayload = z.looseObject({ session_id: z.string() });

export const payloadSchemas = {
  AUTH: z.strictObject({ token: z.string() }),
  AUTH_OK: z.strictObject({ user_id: z.string(), balance_s: z.number().int() }),
  PRESENCE: z.strictObject({
    status: z.enum(["ONLINE", "OFFLINE"]),
    roles: z.array(role),
  }),
  ROSTER_REQ: z.strictObject({ language: z.string(), role_sought: role }),
  ROSTER: z.strictObject({
    language: z.string(),
    role_sought: role,
    users: z.array(rosterUser),
  }),
  INVITE: z.strictObject({
    to: z.string(),
    recipient_role: role,
    language: z.string(),
    level: z.string(),
    invitation_id: z.string().optional(),
    from: z.string().optional(),
  }),
  INVITE_RESULT: z.strictObject({
    invitation_id: z.string(),
    decision: z.enum(["ACCEPT", "REJECT"]).optional(),
    state: z.enum(["ACCEPTED", "REJECTED", "EXPIRED", "CANCELED"]).optional(),
    session_id: z.string().optional(),
    role: role.optional(),
    peer: z.string().optional(),
    lesson_id: z.string().optional(),
  }),
  RTC_OFFER: rtcPayload,
  RTC_ANSWER: rtcPayload,
  RTC_ICE: rtcPayload,
  CARD_ADVANCE: z.strictObject({
    session_id: z.string(),
    to_index: z.number().int(),
  }),
  CARD_STATE: z.strictObject({
    session_id: z.string(),
    card_index: z.number().int(),
    card,
  }),
  SESSION_END: z.strictObject({
    session_id: z.string(),
    cause: z
      .enum(["FINISHED", "HANGUP", "DISCONNECT", "BALANCE_EXHAUSTED"])
      .optional(),
    billed_s: z.number().int().optional(),
    duration_s: z.number().optional(),
  }),
  RATE: z.strictObject({ session_id: z.string(), stars: z.number().int() }),
  ERROR: z.strictObject({
    code: z.string(),
    detail: z.string(),
    ref_seq: z.number().int(),
  }),
} as const;

export type MessageType = keyof typeof payloadSchemas;
export type PayloadOf<T extends MessageType> = z.infer<(typeof payloadSchemas)[T]>;

export type Envelope<T extends MessageType = MessageType> = {
  v: number;
  type: T;
  seq: number;
  payload: PayloadOf<T>;
};

const envelopeShape = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.string(),
  seq: z.number().int().nonnegative(),
  payload: z.record(z.string(), z.unknown()),
});

export class ProtocolError extends Error {}

export function decode(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ProtocolError(`malformed frame: ${(err as Error).message}`);
  }
  const parsed = envelopeShape.safeParse(raw);
  if (!parsed.success) {
    throw new ProtocolError(`malformed envelope: ${parsed.error.message}`);
  }
  const type = parsed.data.type as MessageType;
  const schema = payloadSchemas[type];
  if (schema === undefined) {
    throw new ProtocolError(`unknown message type ${parsed.data.type}`);
  }
  const payload = schema.safeParse(parsed.data.payload);
  if (!payload.success) {
    throw new ProtocolError(`bad ${type} payload: ${payload.error.message}`);
  }
  return { v: PROTOCOL_VERSION, type, seq: parsed.data.seq, payload: payload.data } as Envelope;
}

export function encode<T extends MessageType>(envelope: Envelope<T>): string {
  return JSON.stringify({
    v: envelope.v,
    type: envelope.type,
    seq: envelope.seq,
    payload: envelope.payload,
  });
}
