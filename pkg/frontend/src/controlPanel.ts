// Operator controls: a new-session form prefilled with stock parameters
// and the six intervention/flow buttons. Every click dispatches exactly
// one command document; rejections surface inline without local state
// changes. Buttons stay disabled while no session stream is connected.

import { ServiceClient } from "./api.js";
import { ALL_BUTTONS, ButtonId, commandForButton } from "./commands.js";
import { CommandAck, DEFAULT_PARAMS, SessionParams } from "./types.js";

export interface ControlHooks {
  onSessionCreated: (sessionId: string) => void;
  onAck: (ack: CommandAck) => void;
  onError: (message: string) => void;
}

export class ControlPanel {
  sessionId: string | null = null;
  connected = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly hooks: ControlHooks,
    private readonly root?: HTMLElement,
  ) {
    if (root) this.mount(root);
  }

  async create(params: Partial<SessionParams>): Promise<string> {
    const created = await this.client.createSession(params);
    this.sessionId = created.session_id;
    this.hooks.onSessionCreated(created.session_id);
    return created.session_id;
  }

  /** One button press, one command document. */
  async press(button: ButtonId, options: { stepTicks?: number; runRate?: number } = {}) {
    if (!this.sessionId) {
      this.hooks.onError("no session");
      return null;
    }
    const doc = commandForButton(button, options);
    try {
      const ack = await this.client.command(this.sessionId, doc);
      this.hooks.onAck(ack);
      return ack;
    } catch (err) {
      this.hooks.onError(String(err));
      return null;
    }
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    if (!this.root) return;
    for (const id of ALL_BUTTONS) {
      const el = this.root.querySelector<HTMLButtonElement>(`#btn-${id}`);
      if (el) el.disabled = !connected;
    }
  }

  private mount(root: HTMLElement): void {
    const form = document.createElement("form");
    form.id = "new-session";
    const fields: [keyof SessionParams, string][] = [
      ["n_value_investors", "value investors"],
      ["n_trend_investors", "trend investors"],
      ["n_dealers", "dealers"],
      ["bid_offer", "bid-offer"],
      ["dealer_position_limit", "position limit"],
      ["prob_of_link", "link probability"],
      ["trade_size_cap", "trade size cap"],
      ["market_disparity", "market disparity"],
      ["rng_seed", "seed"],
    ];
    for (const [key, label] of fields) {
      const wrap = document.createElement("label");
      wrap.textContent = label;
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.name = key;
      input.value = String(DEFAULT_PARAMS[key]);
      wrap.appendChild(input);
      form.appendChild(wrap);
    }
    const broker = document.createElement("label");
    broker.textContent = "broker market";
    const checkbox = document.createElement("input");
    checkbox.type = "checkbox";
    checkbox.name = "enable_broker_market";
    checkbox.checked = DEFAULT_PARAMS.enable_broker_market;
    broker.appendChild(checkbox);
    form.appendChild(broker);
    const submit = document.createElement("button");
    submit.textContent = "New session";
    form.appendChild(submit);
    form.onsubmit = (event) => {
      event.preventDefault();
      const params: Record<string, number | boolean> = {};
      for (const [key] of fields) {
        const input = form.querySelector<HTMLInputElement>(`input[name=${key}]`);
        if (input) params[key] = Number(input.value);
      }
      params.enable_broker_market = checkbox.checked;
      this.create(params as Partial<SessionParams>).catch((err) =>
        this.hooks.onError(String(err)),
      );
    };
    root.appendChild(form);

    const bar = document.createElement("div");
    bar.id = "buttons";
    for (const id of ALL_BUTTONS) {
      const el = document.createElement("button");
      el.id = `btn-${id}`;
      el.textContent = id.replace("-", " ");
      el.disabled = true;
      el.onclick = () => void this.press(id);
      bar.appendChild(el);
    }
    root.appendChild(bar);
  }
}
