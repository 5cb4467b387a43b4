// Bootstrap: read the static config, register or restore the account,
// open the signaling socket and wire the screens together.

import { Api } from "./api.js";
import { LingoClient } from "./client.js";
import { browserMediaDeps, MediaPermissionDenied, MediaSession } from "./media.js";
import { socketTransport } from "./transport.js";
import { Ui } from "./ui.js";

type ClientConfig = { server_url: string };

type Saved = { userId: string; token: string; native: string; learning: string };

function savedAccount(): Saved | null {
  const raw = localStorage.getItem("lingobank-account");
  return raw === null ? null : (JSON.parse(raw) as Saved);
}

async function ensureAccount(api: Api): Promise<Saved> {
  const existing = savedAccount();
  if (existing !== null) return existing;
  const userId = prompt("Pick a user name") ?? `guest-${Date.now()}`;
  const native = prompt("Your native language (e.g. en, es)") ?? "en";
  const learning = prompt("Language you want to learn") ?? (native === "es" ? "en" : "es");
  const registration = await api.register(userId, native, learning);
  const account: Saved = { userId, token: registration.token, native, learning };
  localStorage.setItem("lingobank-account", JSON.stringify(account));
  return account;
}

async function boot(): Promise<void> {
  const config = (await (await fetch("./config.json")).json()) as ClientConfig;
  const api = new Api(config.server_url);
  const account = await ensureAccount(api);
  const profile = await api.profile(account.userId);

  const wsUrl = config.server_url.replace(/^http/, "ws") + "/ws";
  const transport = socketTransport(new WebSocket(wsUrl));
  const client = new LingoClient(transport, { nativeLanguage: account.native });
  const ui = new Ui(document.getElementById("app")!, client, api);
  ui.setFunnelVariant(profile.funnel_variant);

  let media: MediaSession | null = null;

  client.on("authed", () => {
    client.setPresence("ONLINE", ["TEACHER", "STUDENT"]);
    ui.showRosterScreen(account.learning);
  });

  client.on("sessionStarted", (view) => {
    media = new MediaSession(browserMediaDeps(), client, view.sessionId, {
      onLocalStream: (stream) => ui.attachStreams(stream as MediaProvider, null),
      onRemoteStream: (stream) => ui.attachStreams(null, stream as MediaProvider),
    });
    void (async () => {
      try {
        await media.acquire();
        if (view.myRole === "TEACHER") await media.call();
      } catch (err) {
        if (err instanceof MediaPermissionDenied) {
          alert("Please allow microphone access and try again.");
          client.endSession();
        } else {
          throw err;
        }
      }
    })();
  });

  client.on("sessionEnded", (end) => {
    media?.stop();
    media = null;
    if (end.cause === "BALANCE_EXHAUSTED") ui.showPurchaseDialog();
  });

  client.on("closed", () => {
    document.getElementById("app")!.append("Connection lost. Reload to reconnect.");
  });

  transport.onOpen(() => client.auth(account.token));
}

void boot();
