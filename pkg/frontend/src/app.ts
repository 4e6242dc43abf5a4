// Assembles model + render + controls over a transport. One instance per
// dashboard; every inbound message folds into the immutable model and the
// screen re-renders from scratch (cheap at these sizes, trivially correct).

import { bindControls, BoundControls, CommandEmitter } from "./controls.js";
import {
  applyConnectionState,
  applyServerMessage,
  initialModel,
  UiSessionModel,
} from "./model.js";
import { renderViews } from "./render.js";
import { ReconnectingClient, TransportState } from "./transport.js";

export class OperatorApp {
  model: UiSessionModel = initialModel();
  readonly emitter: CommandEmitter;
  private bound: BoundControls | null = null;
  private treeRunning = false;

  constructor(
    private readonly client: ReconnectingClient,
    private readonly mount: HTMLElement,
    private readonly confirmFn: (q: string) => boolean = () => true,
  ) {
    this.emitter = new CommandEmitter((msg) => client.send(msg));
    client.onMessage((raw) => this.handleMessage(raw));
    client.onStateChange((state) => this.handleState(state));
  }

  handleMessage(raw: unknown): void {
    this.model = applyServerMessage(this.model, raw);
    const status = this.model.btStatus;
    this.treeRunning = status?.status === "running";
    this.render();
  }

  handleState(state: TransportState): void {
    this.model = applyConnectionState(this.model, state);
    this.render();
  }

  render(): void {
    const doc = this.mount.ownerDocument;
    const tree = renderViews(this.model, doc);
    this.bound?.dispose();
    this.mount.replaceChildren(tree);
    this.bound = bindControls(tree, this.emitter, {
      confirm: this.confirmFn,
      isTreeRunning: () => this.treeRunning,
    });
  }

  async start(): Promise<void> {
    await this.client.start();
    this.render();
  }

  stop(): void {
    this.client.stop();
    this.bound?.dispose();
  }
}
