// Transport abstraction over the signaling socket so the client core can
// run against a browser WebSocket, a node `ws` socket, or a test fake.

export interface Transport {
  send(text: string): void;
  close(): void;
  onMessage(handler: (text: string) => void): void;
  onOpen(handler: () => void): void;
  onClose(handler: () => void): void;
}

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
};

export function socketTransport(socket: WebSocketLike): Transport {
  const messageHandlers: Array<(text: string) => void> = [];
  const openHandlers: Array<() => void> = [];
  const closeHandlers: Array<() => void> = [];
  socket.addEventListener("message", (event: { data: unknown }) => {
    const text =
      typeof event.data === "string" ? event.data : String(event.data);
    for (const handler of messageHandlers) handler(text);
  });
  socket.addEventListener("open", () => {
    for (const handler of openHandlers) handler();
  });
  socket.addEventListener("close", () => {
    for (const handler of closeHandlers) handler();
  });
  return {
    send: (text) => socket.send(text),
    close: () => socket.close(),
    onMessage: (handler) => messageHandlers.push(handler),
    onOpen: (handler) => openHandlers.push(handler),
    onClose: (handler) => closeHandlers.push(handler),
  };
}

/** Test double: records outbound frames, lets tests inject inbound ones. */
export class FakeTransport implements Transport {
  sent: string[] = [];
  closed = false;
  private messageHandlers: Array<(text: string) => void> = [];
  private openHandlers: Array<() => void> = [];
  private closeHandlers: Array<() => void> = [];

  send(text: string): void {
    this.sent.push(text);
  }

  close(): void {
    this.closed = true;
    for (const handler of this.closeHandlers) handler();
  }

  onMessage(handler: (text: string) => void): void {
    this.messageHandlers.push(handler);
  }

  onOpen(handler: () => void): void {
    this.openHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  open(): void {
    for (const handler of this.openHandlers) handler();
  }

  inject(text: string): void {
    for (const handler of this.messageHandlers) handler(text);
  }
}
