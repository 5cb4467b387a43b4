// WebRTC negotiation over the signaling relay.
//
// The teacher side makes the offer (one deterministic caller per session).
// Camera denial falls back to an audio-only stream; only when audio is
// denied too does the session surface a permission error with a retry.
// Implementations of getUserMedia/RTCPeerConnection are injected so the
// flow is testable off-browser.

import type { LingoClient } from "./client.js";
import type { Envelope } from "./protocol.js";

export type TrackStream = {
  getTracks(): Array<{ stop(): void }>;
};

export type PeerConnectionLike = {
  addTrack?: (track: unknown, stream: TrackStream) => void;
  createOffer(): Promise<{ type: string; sdp?: string }>;
  createAnswer(): Promise<{ type: string; sdp?: string }>;
  setLocalDescription(desc: { type: string; sdp?: string }): Promise<void>;
  setRemoteDescription(desc: { type: string; sdp?: string }): Promise<void>;
  addIceCandidate(candidate: unknown): Promise<void>;
  close(): void;
  onicecandidate: ((event: { candidate: unknown }) => void) | null;
  ontrack: ((event: { streams: TrackStream[] }) => void) | null;
};

export type MediaDeps = {
  getUserMedia(constraints: { audio: boolean; video: boolean }): Promise<TrackStream>;
  createPeerConnection(): PeerConnectionLike;
};

export class MediaPermissionDenied extends Error {}

export type MediaEvents = {
  onLocalStream?: (stream: TrackStream, audioOnly: boolean) => void;
  onRemoteStream?: (stream: TrackStream) => void;
};

export class MediaSession {
  localStream: TrackStream | null = null;
  remoteStream: TrackStream | null = null;
  audioOnly = false;
  private peer: PeerConnectionLike | null = null;

  constructor(
    private deps: MediaDeps,
    private client: LingoClient,
    private sessionId: string,
    private events: MediaEvents = {},
  ) {
    client.on("rtc", (envelope) => {
      void this.handleSignal(envelope);
    });
  }

  /** Acquire devices; video denial silently degrades to audio-only. */
  async acquire(): Promise<TrackStream> {
    try {
      this.localStream = await this.deps.getUserMedia({ audio: true, video: true });
    } catch {
      try {
        this.localStream = await this.deps.getUserMedia({ audio: true, video: false });
        this.audioOnly = true;
      } catch (err) {
        throw new MediaPermissionDenied(
          `microphone access is required: ${(err as Error).message}`,
        );
      }
    }
    this.events.onLocalStream?.(this.localStream, this.audioOnly);
    return this.localStream;
  }

  private newPeer(): PeerConnectionLike {
    const peer = this.deps.createPeerConnection();
    if (this.localStream !== null && peer.addTrack) {
      for (const track of this.localStream.getTracks()) {
        peer.addTrack(track, this.localStream);
      }
    }
    peer.onicecandidate = (event) => {
      if (event.candidate) {
        this.client.sendRtc("RTC_ICE", {
          session_id: this.sessionId,
          candidate: event.candidate,
        });
      }
    };
    peer.ontrack = (event) => {
      const stream = event.streams[0];
      if (stream) {
        this.remoteStream = stream;
        this.events.onRemoteStream?.(stream);
      }
    };
    return peer;
  }

  /** Caller side: create and relay the offer. */
  async call(): Promise<void> {
    this.peer = this.newPeer();
    const offer = await this.peer.createOffer();
    await this.peer.setLocalDescription(offer);
    this.client.sendRtc("RTC_OFFER", {
      session_id: this.sessionId,
      sdp: offer.sdp ?? "",
      sdp_type: offer.type,
      audio_only: this.audioOnly,
    });
  }

  private async handleSignal(envelope: Envelope<"RTC_OFFER" | "RTC_ANSWER" | "RTC_ICE">): Promise<void> {
    const payload = envelope.payload as Record<string, unknown> & { session_id: string };
    if (payload.session_id !== this.sessionId) return;
    if (envelope.type === "RTC_OFFER") {
      this.peer ??= this.newPeer();
      await this.peer.setRemoteDescription({
        type: (payload.sdp_type as string) ?? "offer",
        sdp: payload.sdp as string,
      });
      const answer = await this.peer.createAnswer();
      await this.peer.setLocalDescription(answer);
      this.client.sendRtc("RTC_ANSWER", {
        session_id: this.sessionId,
        sdp: answer.sdp ?? "",
        sdp_type: answer.type,
        audio_only: this.audioOnly,
      });
    } else if (envelope.type === "RTC_ANSWER") {
      if (this.peer === null) return;
      await this.peer.setRemoteDescription({
        type: (payload.sdp_type as string) ?? "answer",
        sdp: payload.sdp as string,
      });
    } else {
      if (this.peer === null) return;
      await this.peer.addIceCandidate(payload.candidate);
    }
  }

  stop(): void {
    this.peer?.close();
    this.peer = null;
    for (const track of this.localStream?.getTracks() ?? []) track.stop();
    this.localStream = null;
    this.remoteStream = null;
  }
}

export function browserMediaDeps(): MediaDeps {
  return {
    getUserMedia: (constraints) =>
      navigator.mediaDevices.getUserMedia(constraints) as Promise<TrackStream>,
    createPeerConnection: () =>
      new RTCPeerConnection({
        iceServers: [{ urls: "stun:stun.l.google.com:19302" }],
      }) as unknown as PeerConnectionLike,
  };
}
