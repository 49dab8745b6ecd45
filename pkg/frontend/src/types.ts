// Wire types for the control service. Field names are the contract; the
// dashboard renders these values verbatim and computes no market mechanics.

export interface TradeFrame {
  tick: number;
  buyer: number;
  seller: number;
  mm: number;
  price: number;
  size: number;
  flag: number;
}

export interface AgentFrame {
  id: number;
  role: string;
  inventory: number;
  target: number | null;
  epsilon: number | null;
  profit: number | null;
}

export interface Frame {
  tick: number;
  mids: number[];
  bids: number[];
  offers: number[];
  inventories: number[];
  mean_mid: number;
  arbitrage: number;
  trades: TradeFrame[];
  agents: AgentFrame[];
}

export interface SessionSummary {
  session_id: string;
  tick: number;
  mode: "paused" | "running";
  rate: number | null;
  trained_tick: number | null;
  mean_mid: number;
  arbitrage: number;
  mids: number[];
  bids: number[];
  offers: number[];
  inventories: number[];
  targets: number[];
  epsilons: number[];
  profits: number[];
  value_investors_removed: boolean;
  seed: number;
}

export interface NetworkNode {
  id: number;
  role: string;
  inventory: number | null;
  target: number | null;
  epsilon: number | null;
}

export interface NetworkDoc {
  session_id: string;
  tick: number;
  link_probability: number;
  nodes: NetworkNode[];
  edges: [number, number][];
  edge_list_text: string;
}

export type CommandVerb =
  | "step"
  | "run"
  | "pause"
  | "crash"
  | "force_short"
  | "remove_value_investors"
  | "reset";

export interface CommandDoc {
  verb: CommandVerb;
  n?: number;
  rate?: number;
  seed?: number;
}

export interface CommandAck {
  session_id: string;
  verb: CommandVerb;
  effective_tick: number;
}

export interface SessionParams {
  n_value_investors: number;
  n_trend_investors: number;
  n_dealers: number;
  bid_offer: number;
  dealer_position_limit: number;
  prob_of_link: number;
  trade_size_cap: number;
  market_disparity: number;
  enable_broker_market: boolean;
  rng_seed: number;
}

// New-session form defaults; mirrors the simulator's stock parameters.
export const DEFAULT_PARAMS: SessionParams = {
  n_value_investors: 10,
  n_trend_investors: 5,
  n_dealers: 10,
  bid_offer: 1.0,
  dealer_position_limit: 20,
  prob_of_link: 0.5,
  trade_size_cap: 3,
  market_disparity: 20,
  enable_broker_market: true,
  rng_seed: 0,
};
