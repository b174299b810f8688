"""Seeded discrete-event simulation of a multi-node network.

Time is integer ticks.  Every random draw (latency, drops) comes from one
generator in a fixed order, and every iteration over nodes, events, and
mempool entries is explicitly ordered, so a (scenario, seed) pair replays
to a byte-identical report.

Scenario files are JSON: node specs (authority flag, balance, qualification,
optional bidding strategy), network parameters (latency range, drop
probability or schedule, partitions), and a script of timed actions.
Script actions may name lots and auctions symbolically ("the 0th lot minted
by alice"); unresolvable references retry on later ticks, since the thing
they name may simply not be on chain yet.
"""

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any
from random import Random

from .chain import sign_transaction
from .consensus import AuthoritySchedule, Node, fork_choice, schedule_from_state
from .crypto import KeyPair, MultisigAccount, generate_keypair, multisig_address, sha256
from .genesis import GenesisError, build_genesis_state
from .market import DemandIntent, compute_satisfaction, recommend_bids
from .model import (
    AuctionStatus,
    Block,
    ChainState,
    MintLot,
    OpenAuction,
    PlaceBid,
    RedeemBond,
    RegistryUpdate,
    SettlementMode,
    SignedTransaction,
    Transaction,
    Transfer,
    TransferBond,
    TransferLot,
    bond_id_for_auction,
    compute_state_root,
    EventKind,
)


class ScenarioError(ValueError):
    """Scenario document malformed."""


@dataclass(frozen=True)
class NodeSpec:
    name: str
    authority: bool = False
    balance: int = 0
    qualified: bool = False
    strategy: str | None = None
    key_seed: bytes | None = None


@dataclass(frozen=True)
class Partition:
    start_tick: int
    end_tick: int
    group_a: frozenset[int]
    group_b: frozenset[int]

    def blocks_pair(self, a: int, b: int, tick: int) -> bool:
        if not self.start_tick <= tick < self.end_tick:
            return False
        return (a in self.group_a and b in self.group_b) or (
            a in self.group_b and b in self.group_a
        )


@dataclass(frozen=True)
class ScriptAction:
    tick: int
    node: str
    action: str
    args: dict[str, Any]


@dataclass(frozen=True)
class SimConfig:
    seed: int
    ticks: int
    nodes: tuple[NodeSpec, ...]
    latency_min: int = 1
    latency_max: int = 3
    drop_probability: float = 0.0
    # (from_tick, probability) steps; overrides drop_probability from each step on.
    drop_schedule: tuple[tuple[int, float], ...] = ()
    partitions: tuple[Partition, ...] = ()
    announce_interval_ticks: int = 10
    authority_threshold: int | None = None
    governors: tuple[str, ...] = ()
    params: dict[str, int] = field(default_factory=dict)
    script: tuple[ScriptAction, ...] = ()

    def __post_init__(self):
        if not 0 <= self.latency_min <= self.latency_max:
            raise ScenarioError("latency range must satisfy 0 <= min <= max")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ScenarioError("drop_probability must be within 0..1")
        for _, p in self.drop_schedule:
            if not 0.0 <= p <= 1.0:
                raise ScenarioError("drop_schedule probabilities must be within 0..1")
        if not self.nodes:
            raise ScenarioError("scenario needs at least one node")


@dataclass(frozen=True)
class NetworkEvent:
    deliver_at_tick: int
    sender: int
    recipient: int
    kind: str  # "tx" | "block" | "head" | "request"
    payload: Any
    seq: int


@dataclass
class SimReport:
    seed: int
    ticks: int
    nodes: list[dict]
    receipts: list[list[dict]]
    satisfaction: dict
    messages: dict
    last_agreement_tick: int | None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "ticks": self.ticks,
            "nodes": self.nodes,
            "receipts": self.receipts,
            "satisfaction": self.satisfaction,
            "messages": self.messages,
            "last_agreement_tick": self.last_agreement_tick,
        }

    def json_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, indent=2).encode()


def default_key_seed(name: str) -> bytes:
    return sha256(b"sim-node-key:" + name.encode())


def scenario_genesis(config: SimConfig) -> tuple[ChainState, dict[str, KeyPair]]:
    """Build genesis and per-node keypairs from the scenario."""
    keypairs: dict[str, KeyPair] = {}
    for spec in config.nodes:
        seed = spec.key_seed if spec.key_seed is not None else default_key_seed(spec.name)
        keypairs[spec.name] = generate_keypair(seed)

    authority_names = [s.name for s in config.nodes if s.authority]
    if not authority_names:
        raise ScenarioError("scenario needs at least one authority node")
    authorities = [keypairs[n].address for n in authority_names]

    governor_names = list(config.governors)
    if not governor_names:
        governor_names = authority_names if len(authority_names) >= 2 else [
            s.name for s in config.nodes
        ]
    if len(governor_names) < 2:
        raise ScenarioError("registry account needs at least two governors")
    members = tuple(keypairs[n].address for n in governor_names)
    threshold = config.authority_threshold or (len(members) // 2 + 1)
    account = MultisigAccount(members=members, threshold=threshold)

    balances = {keypairs[s.name].address: s.balance for s in config.nodes if s.balance > 0}
    qualified = {keypairs[s.name].address for s in config.nodes if s.qualified}
    state = build_genesis_state(
        authorities=authorities,
        authority_account=account,
        balances=balances,
        qualified=qualified,
        **config.params,
    )
    return state, keypairs


class Simulator:
    """Owns the nodes, the event queue, and the single RNG."""

    def __init__(self, config: SimConfig):
        self.config = config
        genesis_state, keypairs = scenario_genesis(config)
        self.genesis_state = genesis_state
        self.keypairs = keypairs
        self.schedule: AuthoritySchedule = schedule_from_state(genesis_state)
        self.nodes = [
            Node(i, genesis_state, keypairs[spec.name])
            for i, spec in enumerate(config.nodes)
        ]
        self.names = [spec.name for spec in config.nodes]
        self.ids = {spec.name: i for i, spec in enumerate(config.nodes)}
        self.rng = Random(config.seed)
        self.tick = 0
        self._queue: list[tuple[int, int, int, NetworkEvent]] = []
        self._seq = 0
        self._pending_script: list[ScriptAction] = sorted(
            config.script, key=lambda a: a.tick
        )
        self._done_script: list[ScriptAction] = []
        self.intents: list[tuple[str, DemandIntent]] = []
        self._last_bid: list[dict[bytes, int]] = [dict() for _ in config.nodes]
        self.counts = {"sent": 0, "delivered": 0, "dropped": 0, "blocked": 0}
        self.counts_by_kind: dict[str, int] = {}
        # Most recent tick at which every node reported the same head.  A run
        # whose final tick catches the newest block mid-delivery still shows
        # when the network last agreed.
        self.last_agreement_tick: int | None = None

    # --- transport -----------------------------------------------------------

    def _drop_probability(self, tick: int) -> float:
        p = self.config.drop_probability
        for from_tick, value in self.config.drop_schedule:
            if tick >= from_tick:
                p = value
        return p

    def _blocked(self, a: int, b: int, tick: int) -> bool:
        return any(part.blocks_pair(a, b, tick) for part in self.config.partitions)

    def _send(self, sender: int, recipient: int, kind: str, payload: Any) -> None:
        self.counts_by_kind[kind] = self.counts_by_kind.get(kind, 0) + 1
        self.counts["sent"] += 1
        if self._blocked(sender, recipient, self.tick):
            self.counts["blocked"] += 1
            return
        p = self._drop_probability(self.tick)
        if p > 0.0 and self.rng.random() < p:
            self.counts["dropped"] += 1
            return
        latency = self.rng.randint(self.config.latency_min, self.config.latency_max)
        latency = max(latency, 1)
        event = NetworkEvent(
            deliver_at_tick=self.tick + latency,
            sender=sender,
            recipient=recipient,
            kind=kind,
            payload=payload,
            seq=self._seq,
        )
        heapq.heappush(self._queue, (event.deliver_at_tick, event.sender, event.seq, event))
        self._seq += 1

    def _broadcast(self, sender: int, kind: str, payload: Any) -> None:
        for recipient in range(len(self.nodes)):
            if recipient != sender:
                self._send(sender, recipient, kind, payload)

    # --- one tick ---------------------------------------------------------------

    def step(self) -> None:
        self._deliver_due()
        self._run_script()
        self._run_strategies()
        self._run_producers()
        if (
            self.config.announce_interval_ticks > 0
            and self.tick > 0
            and self.tick % self.config.announce_interval_ticks == 0
        ):
            for node in self.nodes:
                self._broadcast(node.id, "head", (node.chain.height, node.chain.head_hash))
        if len({node.chain.head_hash for node in self.nodes}) == 1:
            self.last_agreement_tick = self.tick
        self.tick += 1

    def _deliver_due(self) -> None:
        while self._queue and self._queue[0][0] <= self.tick:
            _, _, _, event = heapq.heappop(self._queue)
            self.counts["delivered"] += 1
            node = self.nodes[event.recipient]
            if event.kind == "tx":
                if node.on_receive_tx(event.payload, self.tick):
                    self._broadcast(node.id, "tx", event.payload)
            elif event.kind == "block":
                status, requests = node.on_receive_block(event.payload, self.tick)
                if status == "accepted":
                    self._broadcast(node.id, "block", event.payload)
                for digest in requests:
                    self._send(node.id, event.sender, "request", digest)
            elif event.kind == "head":
                height, digest = event.payload
                for wanted in node.on_receive_head(height, digest, self.tick):
                    self._send(node.id, event.sender, "request", wanted)
            elif event.kind == "request":
                block = node.on_block_request(event.payload)
                if block is not None:
                    self._send(node.id, event.sender, "block", block)

    def _run_producers(self) -> None:
        for node in self.nodes:
            block = node.try_produce(self.tick)
            if block is not None:
                self._broadcast(node.id, "block", block)

    # --- scripted actions ---------------------------------------------------------

    def _run_script(self) -> None:
        remaining: list[ScriptAction] = []
        for action in self._pending_script:
            if action.tick > self.tick:
                remaining.append(action)
                continue
            if self._attempt_action(action):
                self._done_script.append(action)
            else:
                remaining.append(action)
        self._pending_script = remaining

    def _address_of(self, ref: str) -> bytes:
        if ref in self.ids:
            return self.keypairs[ref].address
        try:
            raw = bytes.fromhex(ref)
        except ValueError:
            raise ScenarioError(f"unknown participant {ref!r}") from None
        return raw

    def _find_event_id(
        self, node: Node, kind: EventKind, actor_hex: str, actor_field: str, index: int,
        id_field: str,
    ) -> bytes | None:
        seen = 0
        for per_height in node.chain.receipts:
            for receipt in per_height:
                for event in receipt.events:
                    if event.kind != kind or event.data.get(actor_field) != actor_hex:
                        continue
                    if seen == index:
                        return bytes.fromhex(event.data[id_field])
                    seen += 1
        return None

    def _resolve_lot(self, node: Node, ref: Any) -> bytes | None:
        if isinstance(ref, str):
            return bytes.fromhex(ref)
        if "id" in ref:
            return bytes.fromhex(ref["id"])
        minted_by = self.keypairs[ref["minted_by"]].address.hex()
        return self._find_event_id(
            node, EventKind.LOT_MINTED, minted_by, "origin", int(ref.get("index", 0)), "lot_id"
        )

    def _resolve_auction(self, node: Node, ref: Any) -> bytes | None:
        if isinstance(ref, str):
            return bytes.fromhex(ref)
        if "id" in ref:
            return bytes.fromhex(ref["id"])
        opened_by = self.keypairs[ref["opened_by"]].address.hex()
        return self._find_event_id(
            node, EventKind.AUCTION_OPENED, opened_by, "seller", int(ref.get("index", 0)),
            "auction_id",
        )

    def _resolve_bond(self, node: Node, ref: Any) -> bytes | None:
        if isinstance(ref, str):
            return bytes.fromhex(ref)
        if "id" in ref:
            return bytes.fromhex(ref["id"])
        auction_id = self._resolve_auction(node, ref["auction"])
        if auction_id is None:
            return None
        return bond_id_for_auction(auction_id)

    def _attempt_action(self, action: ScriptAction) -> bool:
        node = self.nodes[self.ids[action.node]]
        keypair = self.keypairs[action.node]
        args = action.args
        params = node.chain.state.params

        if action.action == "intent":
            self.intents.append(
                (
                    action.node,
                    DemandIntent(
                        buyer=keypair.address,
                        kwh_needed=int(args["kwh_needed"]),
                        max_price=int(args["max_price"]),
                        active=bool(args.get("active", True)),
                    ),
                )
            )
            return True

        if action.action == "mint_lot":
            payload = MintLot(kwh=int(args["kwh"]))
        elif action.action == "open_auction":
            lot_id = self._resolve_lot(node, args["lot"])
            if lot_id is None:
                return False
            mode_name = args.get("mode", "cash")
            payload = OpenAuction(
                lot_id=lot_id,
                base_price=int(args["base_price"]),
                min_increment=int(args.get("min_increment", params.default_min_increment)),
                duration_blocks=int(args.get("duration_blocks", params.default_auction_duration)),
                mode=SettlementMode.BOND_ALLOWED if mode_name == "bond" else SettlementMode.CASH,
            )
        elif action.action == "bid":
            auction_id = self._resolve_auction(node, args["auction"])
            if auction_id is None:
                return False
            payload = PlaceBid(auction_id=auction_id, amount=int(args["amount"]))
        elif action.action == "transfer":
            payload = Transfer(to=self._address_of(args["to"]), amount=int(args["amount"]))
        elif action.action == "transfer_lot":
            lot_id = self._resolve_lot(node, args["lot"])
            if lot_id is None:
                return False
            payload = TransferLot(to=self._address_of(args["to"]), lot_id=lot_id)
        elif action.action == "transfer_bond":
            bond_id = self._resolve_bond(node, args["bond"])
            if bond_id is None:
                return False
            payload = TransferBond(to=self._address_of(args["to"]), bond_id=bond_id)
        elif action.action == "redeem_bond":
            bond_id = self._resolve_bond(node, args["bond"])
            if bond_id is None:
                return False
            payload = RedeemBond(bond_id=bond_id)
        elif action.action == "registry_update":
            payload = RegistryUpdate(
                add=tuple(self._address_of(n) for n in args.get("add", [])),
                remove=tuple(self._address_of(n) for n in args.get("remove", [])),
            )
            signers = [self.keypairs[name] for name in args["signers"]]
            sender = multisig_address(node.chain.state.params.authority_account)
            return self._submit(node, sender, payload, signers)
        else:
            raise ScenarioError(f"unknown script action {action.action!r}")

        return self._submit(node, keypair.address, payload, [keypair])

    def _pending_nonces(self, node: Node, sender: bytes) -> int:
        return sum(1 for _, stx in node.mempool.values() if stx.tx.sender == sender)

    def _submit(
        self, node: Node, sender: bytes, payload: Any, signers: list[KeyPair]
    ) -> bool:
        nonce = node.chain.state.account(sender).nonce + self._pending_nonces(node, sender)
        tx = Transaction(sender=sender, nonce=nonce, payload=payload)
        stx = sign_transaction(tx, *signers)
        if node.on_receive_tx(stx, self.tick):
            self._broadcast(node.id, "tx", stx)
        return True

    # --- strategies ------------------------------------------------------------------

    def _run_strategies(self) -> None:
        for node, spec in zip(self.nodes, self.config.nodes):
            if spec.strategy == "intent_bidder":
                self._bid_for_intents(node, spec.name)
            elif spec.strategy is not None:
                raise ScenarioError(f"unknown strategy {spec.strategy!r}")

    def _bid_for_intents(self, node: Node, name: str) -> None:
        """Place recommended bids for this node's unsatisfied intents."""
        me = self.keypairs[name].address
        mine = [intent for owner, intent in self.intents if owner == name and intent.active]
        if not mine:
            return
        state = node.chain.state
        committed = 0
        open_auctions = []
        for aid in sorted(state.auctions):
            auction = state.auctions[aid]
            if auction.status != AuctionStatus.OPEN:
                continue
            if auction.best_bid is not None and auction.best_bid.bidder == me:
                committed += 1
                continue
            open_auctions.append(auction)
        wins = sum(
            1
            for per_height in node.chain.receipts
            for receipt in per_height
            for event in receipt.events
            if event.kind == EventKind.AUCTION_SETTLED and event.data.get("winner") == me.hex()
        )
        outstanding = mine[wins + committed :]
        if not outstanding:
            return
        plan = recommend_bids(open_auctions, state.lots, outstanding)
        for assignment in plan.assignments:
            last = self._last_bid[node.id].get(assignment.auction_id)
            if last is not None and assignment.suggested_bid <= last:
                continue
            self._last_bid[node.id][assignment.auction_id] = assignment.suggested_bid
            keypair = self.keypairs[name]
            self._submit(
                node,
                me,
                PlaceBid(auction_id=assignment.auction_id, amount=assignment.suggested_bid),
                [keypair],
            )

    # --- reporting ------------------------------------------------------------------

    def best_node(self) -> Node:
        best = self.nodes[0]
        for node in self.nodes[1:]:
            if node.chain.head_hash == best.chain.head_hash:
                continue
            winner = fork_choice(self.schedule, best.chain.head.header, node.chain.head.header)
            if winner is node.chain.head.header:
                best = node
        return best

    def report(self) -> SimReport:
        best = self.best_node()
        all_intents = [intent for _, intent in self.intents]
        satisfaction = compute_satisfaction(
            best.chain.receipts, all_intents, self.genesis_state.params
        )
        node_rows = [
            {
                "name": self.names[node.id],
                "id": node.id,
                "head_height": node.chain.height,
                "head_hash": node.chain.head_hash.hex(),
                "state_root": compute_state_root(node.chain.state).hex(),
                "mempool": len(node.mempool),
                "discarded_blocks": len(node.discard_log),
            }
            for node in self.nodes
        ]
        receipts = [
            [receipt.to_json() for receipt in per_height] for per_height in best.chain.receipts
        ]
        messages = dict(self.counts)
        messages["by_kind"] = {k: self.counts_by_kind[k] for k in sorted(self.counts_by_kind)}
        return SimReport(
            seed=self.config.seed,
            ticks=self.tick,
            nodes=node_rows,
            receipts=receipts,
            satisfaction=satisfaction.to_json(),
            messages=messages,
            last_agreement_tick=self.last_agreement_tick,
        )

    def run(self, until_tick: int | None = None) -> SimReport:
        until = self.config.ticks if until_tick is None else until_tick
        while self.tick < until:
            self.step()
        return self.report()


def run(config: SimConfig, until_tick: int | None = None) -> SimReport:
    """Build a simulator from ``config`` and run it to the horizon."""
    return Simulator(config).run(until_tick)


# --- scenario files ------------------------------------------------------------------


# A typo'd field silently falling back to a default would change a run's
# meaning, so both parsers reject keys they do not know.
_NODE_KEYS = frozenset({"name", "authority", "balance", "qualified", "strategy", "key_seed"})
_SCENARIO_KEYS = frozenset(
    {
        "seed",
        "ticks",
        "nodes",
        "latency_ticks",
        "drop_probability",
        "drop_schedule",
        "partitions",
        "announce_interval_ticks",
        "authority_threshold",
        "governors",
        "params",
        "script",
    }
)


def _node_spec_from_json(doc: dict) -> NodeSpec:
    unknown = set(doc) - _NODE_KEYS
    if unknown:
        raise ScenarioError(f"unknown node fields: {sorted(unknown)}")
    key_seed = None
    if "key_seed" in doc:
        key_seed = bytes.fromhex(doc["key_seed"])
    return NodeSpec(
        name=str(doc["name"]),
        authority=bool(doc.get("authority", False)),
        balance=int(doc.get("balance", 0)),
        qualified=bool(doc.get("qualified", False)),
        strategy=doc.get("strategy"),
        key_seed=key_seed,
    )


def scenario_from_json(doc: dict) -> SimConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        nodes = tuple(_node_spec_from_json(n) for n in doc["nodes"])
    except KeyError as exc:
        raise ScenarioError(f"node spec missing field {exc}") from exc
    names = [n.name for n in nodes]
    if len(set(names)) != len(names):
        raise ScenarioError("node names must be unique")
    ids = {name: i for i, name in enumerate(names)}

    partitions = []
    for part in doc.get("partitions", []):
        try:
            partitions.append(
                Partition(
                    start_tick=int(part["start"]),
                    end_tick=int(part["end"]),
                    group_a=frozenset(ids[n] for n in part["group_a"]),
                    group_b=frozenset(ids[n] for n in part["group_b"]),
                )
            )
        except KeyError as exc:
            raise ScenarioError(f"partition references unknown node or field: {exc}") from exc

    latency = doc.get("latency_ticks", [1, 3])
    script = []
    for i, entry in enumerate(doc.get("script", [])):
        try:
            args = {k: v for k, v in entry.items() if k not in ("tick", "node", "action")}
            script.append(
                ScriptAction(
                    tick=int(entry["tick"]),
                    node=str(entry["node"]),
                    action=str(entry["action"]),
                    args=args,
                )
            )
        except KeyError as exc:
            raise ScenarioError(f"script[{i}] missing field {exc}") from exc
        if script[-1].node not in ids:
            raise ScenarioError(f"script[{i}] references unknown node {script[-1].node!r}")

    return SimConfig(
        seed=int(doc.get("seed", 0)),
        ticks=int(doc.get("ticks", 100)),
        nodes=nodes,
        latency_min=int(latency[0]),
        latency_max=int(latency[1]),
        drop_probability=float(doc.get("drop_probability", 0.0)),
        drop_schedule=tuple(
            (int(t), float(p)) for t, p in doc.get("drop_schedule", [])
        ),
        partitions=tuple(partitions),
        announce_interval_ticks=int(doc.get("announce_interval_ticks", 10)),
        authority_threshold=doc.get("authority_threshold"),
        governors=tuple(doc.get("governors", [])),
        params={k: int(v) for k, v in doc.get("params", {}).items()},
        script=tuple(script),
    )


def load_scenario(path: str | Path) -> SimConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_json(doc)
