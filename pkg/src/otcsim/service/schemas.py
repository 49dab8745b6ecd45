"""Request/response models for the control service.

Field names here are part of the wire contract: the dashboard binds to
them directly, so renaming anything is a breaking change.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from otcsim.config import SimConfig


class SimConfigModel(BaseModel):
    n_value_investors: int = Field(default=10, ge=0)
    n_trend_investors: int = Field(default=5, ge=0)
    n_dealers: int = Field(default=10, ge=1)
    bid_offer: float = Field(default=1.0, ge=0)
    dealer_position_limit: float = Field(default=20.0, ge=0)
    prob_of_link: float = Field(default=0.50, ge=0.0, le=1.0)
    trade_size_cap: float = Field(default=3.0, gt=0)
    market_disparity: float = Field(default=20.0)
    enable_broker_market: bool = True
    skew_coefficient: float = 0.001
    vi_sigma: float = Field(default=5.0, gt=0)
    target_mixture_sigma: float = Field(default=5.0, ge=0)
    initial_price: float = 100.0
    rng_seed: int = Field(default=0, ge=0)
    discount: float = Field(default=0.99, ge=0.0, le=1.0)
    batch_size: int = Field(default=32, ge=1)
    replay_capacity: int = Field(default=10_000, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    tau: float = Field(default=1e-3, ge=0.0, le=1.0)
    epsilon_decay: float = Field(default=0.995, gt=0.0, le=1.0)
    epsilon_floor: float = Field(default=0.05, ge=0.0, le=1.0)
    reward_scale: float = Field(default=100.0, gt=0)

    def to_config(self) -> SimConfig:
        return SimConfig(**self.model_dump()).validate()


class CreateSessionRequest(BaseModel):
    config: SimConfigModel = Field(default_factory=SimConfigModel)


class CreateSessionResponse(BaseModel):
    session_id: str
    tick: int


Verb = Literal[
    "step", "run", "pause", "crash", "force_short", "remove_value_investors", "reset"
]


class CommandRequest(BaseModel):
    verb: Verb
    n: Optional[int] = Field(
        default=None, ge=1, le=10_000_000, description="ticks for step"
    )
    rate: Optional[float] = Field(
        default=None, gt=0, le=1000, description="ticks per second for run"
    )
    seed: Optional[int] = Field(default=None, ge=0, description="seed for reset")


class CommandAck(BaseModel):
    session_id: str
    verb: Verb
    effective_tick: int


class TradeModel(BaseModel):
    tick: int
    buyer: int
    seller: int
    mm: int
    price: float
    size: float
    flag: int


class AgentFrame(BaseModel):
    id: int
    role: str
    inventory: float
    target: Optional[float] = None
    epsilon: Optional[float] = None
    profit: Optional[float] = None


class Frame(BaseModel):
    tick: int
    mids: list[float]
    bids: list[float]
    offers: list[float]
    inventories: list[float]
    mean_mid: float
    arbitrage: float
    trades: list[TradeModel]
    agents: list[AgentFrame]


class SessionSummary(BaseModel):
    session_id: str
    tick: int
    mode: Literal["paused", "running"]
    rate: Optional[float]
    trained_tick: Optional[int]
    mean_mid: float
    arbitrage: float
    mids: list[float]
    bids: list[float]
    offers: list[float]
    inventories: list[float]
    targets: list[float]
    epsilons: list[float]
    profits: list[float]
    value_investors_removed: bool
    seed: int
    config: SimConfigModel


class NetworkNode(BaseModel):
    id: int
    role: str
    inventory: Optional[float] = None
    target: Optional[float] = None
    epsilon: Optional[float] = None


class NetworkResponse(BaseModel):
    session_id: str
    tick: int
    link_probability: float
    nodes: list[NetworkNode]
    edges: list[tuple[int, int]]
    edge_list_text: str
