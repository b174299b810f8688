"""Single-writer runtime around one consensus node.

All mutation (tx intake, block production, log persistence) happens under
one lock; read endpoints capture their whole response under the same lock
so every reply is a consistent snapshot of a single height.  Wall-clock
time exists only here: a ticker thread advances integer ticks and lets the
node produce when scheduled, keeping the core deterministic.
"""

import threading
from pathlib import Path

from ..blocklog import append_block_to_log, load_chain_from_log
from ..chain import check_tx_signatures, sign_transaction
from ..consensus import Node
from ..crypto import KeyPair, multisig_address
from ..market import next_valid_bid
from ..model import (
    AuctionStatus,
    Block,
    BondState,
    ChainState,
    DecodeError,
    RegistryUpdate,
    Transaction,
    block_hash,
    compute_state_root,
    decode_signed_transaction,
    encode_signed_transaction,
    total_funds,
    tx_id,
)
from ..wallet import WalletError, WalletStore
from .schemas import MODE_NAMES, SchemaError, payload_from_json

_STATUS_NAMES = {
    AuctionStatus.OPEN: "open",
    AuctionStatus.SETTLED: "settled",
    AuctionStatus.DISCARDED: "discarded",
}
_BOND_STATE_NAMES = {
    BondState.OUTSTANDING: "outstanding",
    BondState.REDEEMED: "redeemed",
    BondState.DEFAULTED: "defaulted",
}


class ApiError(Exception):
    """Service-level failure carried to the client as {code, message}."""

    def __init__(self, code: str, message: str, http_status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = http_status


def not_found(message: str) -> ApiError:
    return ApiError("NOT_FOUND", message, 404)


def bad_request(message: str) -> ApiError:
    return ApiError("BAD_REQUEST", message, 400)


class NodeRuntime:
    """One live node: ticker thread, block log, event feed, wallet signing."""

    def __init__(
        self,
        genesis_state: ChainState,
        *,
        keypair: KeyPair | None = None,
        wallet: WalletStore | None = None,
        log_path: str | Path | None = None,
        tick_seconds: float = 0.5,
    ):
        self._lock = threading.RLock()
        self.node = Node(0, genesis_state, keypair)
        self.genesis_state = genesis_state
        self.wallet = wallet
        self.tick_seconds = tick_seconds
        self._tick = 0
        self._events: list[dict] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

        self._log_path = Path(log_path) if log_path is not None else None
        if self._log_path is not None:
            self._restore_or_start_log()
        self._emit_head()

    # -- persistence -----------------------------------------------------

    def _restore_or_start_log(self) -> None:
        path = self._log_path
        if path.exists() and path.stat().st_size > 0:
            blocks = load_chain_from_log(path)
            for block in blocks[1:]:
                self.node.chain.append(block)
                self._emit_block(block)
            head = self.node.chain.head.header
            self._tick = head.tick
        else:
            append_block_to_log(path, self.node.chain.blocks[0])

    # -- ticker ----------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, daemon=True, name="gx-ticker")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def _run(self) -> None:
        while not self._stop.wait(self.tick_seconds):
            self.advance(1)

    def advance(self, ticks: int = 1) -> Block | None:
        """Move simulated time forward; returns the block produced, if any."""
        produced = None
        with self._lock:
            for _ in range(ticks):
                self._tick += 1
                block = self.node.try_produce(self._tick)
                if block is not None:
                    if self._log_path is not None:
                        append_block_to_log(self._log_path, block)
                    self._emit_block(block)
                    produced = block
        return produced

    def produce_block(self) -> Block | None:
        """Jump time far enough for the next slot and produce immediately."""
        with self._lock:
            interval = self.node.schedule.block_interval_ticks
            self._tick = max(self._tick, self.node.chain.head.header.tick + interval)
            block = self.node.try_produce(self._tick)
            if block is not None:
                if self._log_path is not None:
                    append_block_to_log(self._log_path, block)
                self._emit_block(block)
            return block

    # -- event feed --------------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> None:
        self._events.append({"seq": len(self._events), "event": kind, **payload})

    def _emit_block(self, block: Block) -> None:
        height = block.header.height
        for receipt in self.node.chain.receipts_at(height):
            self._emit("receipt", {"height": height, **receipt.to_json()})
        self._emit_head()

    def _emit_head(self) -> None:
        chain = self.node.chain
        self._emit(
            "head",
            {
                "height": chain.height,
                "hash": chain.head_hash.hex(),
                "state_root": compute_state_root(chain.state).hex(),
            },
        )

    def events_since(self, after_seq: int) -> list[dict]:
        with self._lock:
            return self._events[after_seq + 1 :]

    @property
    def event_count(self) -> int:
        with self._lock:
            return len(self._events)

    # -- writes ------------------------------------------------------------

    def submit_tx(self, raw_hex: str) -> dict:
        try:
            raw = bytes.fromhex(raw_hex)
        except ValueError:
            raise bad_request("tx must be hex") from None
        try:
            stx = decode_signed_transaction(raw)
        except DecodeError as exc:
            raise bad_request(f"undecodable transaction: {exc}") from None

        with self._lock:
            tid = tx_id(stx)
            if tid in self.node.mempool:
                return {"tx_id": tid.hex(), "status": "queued"}
            existing = self.node.chain.receipt_for(tid)
            if existing is not None:
                _, receipt = existing
                return {
                    "tx_id": tid.hex(),
                    "status": "accepted" if receipt.accepted else "rejected",
                }
            reason = check_tx_signatures(self.node.chain.state, stx)
            if reason is not None:
                raise ApiError(reason.value, f"transaction rejected: {reason.value}")
            if stx.tx.nonce < self.node.chain.state.account(stx.tx.sender).nonce:
                raise ApiError("BAD_NONCE", "nonce already consumed")
            if not self.node.on_receive_tx(stx, self._tick):
                raise bad_request("transaction not admitted")
            return {"tx_id": tid.hex(), "status": "queued"}

    def sign_tx(self, name: str, doc: dict) -> dict:
        """Build, auto-nonce and sign an unsigned tx document with wallet keys."""
        if self.wallet is None:
            raise ApiError("BAD_REQUEST", "node runs without a wallet", 400)
        try:
            signer = self.wallet.get(name)
        except WalletError as exc:
            raise not_found(str(exc)) from None

        params = self.node.chain.state.params
        try:
            payload = payload_from_json(
                doc,
                default_min_increment=params.default_min_increment,
                default_auction_duration=params.default_auction_duration,
            )
        except SchemaError as exc:
            raise bad_request(str(exc)) from None

        pairs = [signer]
        if isinstance(payload, RegistryUpdate):
            # Registry changes come from the authority multisig account.
            sender = multisig_address(params.authority_account)
            for other in doc.get("signers") or []:
                if other == name:
                    continue
                try:
                    pairs.append(self.wallet.get(other))
                except WalletError as exc:
                    raise not_found(str(exc)) from None
        elif doc.get("sender") is not None:
            try:
                sender = bytes.fromhex(doc["sender"])
            except ValueError:
                raise bad_request("sender must be hex") from None
            if sender != signer.address:
                raise bad_request("sender does not match signing key")
        else:
            sender = signer.address

        with self._lock:
            nonce = doc.get("nonce")
            if nonce is None:
                nonce = self.node.chain.state.account(sender).nonce
                for _, pending in self.node.mempool.values():
                    if pending.tx.sender == sender:
                        nonce += 1
            tx = Transaction(sender=sender, nonce=int(nonce), payload=payload)
            stx = sign_transaction(tx, *pairs)
            return {
                "tx_id": tx_id(stx).hex(),
                "hex": encode_signed_transaction(stx).hex(),
                "sender": sender.hex(),
                "nonce": int(nonce),
            }

    # -- reads (each a consistent snapshot) ---------------------------------

    def head(self) -> dict:
        with self._lock:
            chain = self.node.chain
            return {
                "height": chain.height,
                "hash": chain.head_hash.hex(),
                "state_root": compute_state_root(chain.state).hex(),
            }

    def block(self, height: int) -> dict:
        with self._lock:
            chain = self.node.chain
            if height < 0 or height > chain.height:
                raise not_found(f"no block at height {height}")
            block = chain.block_at(height)
            return {
                "height": height,
                "hash": block_hash(block).hex(),
                "prev_hash": block.header.prev_hash.hex(),
                "producer": block.header.producer.hex(),
                "tick": block.header.tick,
                "tx_ids": [tx_id(stx).hex() for stx in block.txs],
                "receipts": [r.to_json() for r in chain.receipts_at(height)],
            }

    def account(self, addr_hex: str) -> dict:
        addr = _parse_addr(addr_hex)
        with self._lock:
            state = self.node.chain.state
            acct = state.account(addr)
            return {
                "address": addr.hex(),
                "balance": acct.balance,
                "nonce": acct.nonce,
                "qualified": addr in state.qualified,
            }

    def _auction_row(self, auction, state: ChainState, height: int) -> dict:
        lot = state.lots.get(auction.lot_id)
        is_open = auction.status == AuctionStatus.OPEN
        best = auction.best_bid
        return {
            "id": auction.id.hex(),
            "seller": auction.seller.hex(),
            "lot_id": auction.lot_id.hex(),
            "lot_kwh": lot.kwh if lot is not None else 0,
            "base_price": auction.base_price,
            "min_increment": auction.min_increment,
            "deadline_height": auction.deadline_height,
            "mode": MODE_NAMES[auction.mode],
            "status": _STATUS_NAMES[auction.status],
            "best_bid": None
            if best is None
            else {"bidder": best.bidder.hex(), "amount": best.amount},
            "next_valid_bid": next_valid_bid(auction) if is_open else None,
            "blocks_remaining": max(auction.deadline_height - height, 0) if is_open else None,
        }

    def auctions(self, status: str | None = None) -> list[dict]:
        if status is not None and status not in _STATUS_NAMES.values():
            raise bad_request(f"unknown status filter {status!r}")
        with self._lock:
            state = self.node.chain.state
            height = self.node.chain.height
            rows = [
                self._auction_row(a, state, height)
                for a in sorted(state.auctions.values(), key=lambda a: a.id)
            ]
        if status is not None:
            rows = [r for r in rows if r["status"] == status]
        return rows

    def auction(self, auction_id_hex: str) -> dict:
        aid = _parse_digest(auction_id_hex)
        with self._lock:
            chain = self.node.chain
            state = chain.state
            auction = state.auctions.get(aid)
            if auction is None:
                raise not_found(f"no auction {aid.hex()}")
            row = self._auction_row(auction, state, chain.height)
            history = []
            for height, receipts in enumerate(chain.receipts):
                for receipt in receipts:
                    for event in receipt.events:
                        if event.data.get("auction_id") == aid.hex():
                            history.append({"height": height, "event": event.to_json()})
            row["history"] = history
            return row

    def lot_trace(self, lot_id_hex: str) -> dict:
        lid = _parse_digest(lot_id_hex)
        with self._lock:
            chain = self.node.chain
            lot = chain.state.lots.get(lid)
            if lot is None:
                raise not_found(f"no lot {lid.hex()}")
            events = chain.trace_lot(lid)
            return {
                "lot_id": lid.hex(),
                "kwh": lot.kwh,
                "owner": lot.owner.hex(),
                "locked_in": lot.locked_in.hex() if lot.locked_in else None,
                "events": [e.to_json() for e in events],
            }

    def bond(self, bond_id_hex: str) -> dict:
        bid = _parse_digest(bond_id_hex)
        with self._lock:
            bond = self.node.chain.state.bonds.get(bid)
            if bond is None:
                raise not_found(f"no bond {bid.hex()}")
            return {
                "id": bond.id.hex(),
                "face_value": bond.face_value,
                "issuer": bond.issuer.hex(),
                "holder": bond.holder.hex(),
                "maturity_height": bond.maturity_height,
                "state": _BOND_STATE_NAMES[bond.state],
            }

    def params(self) -> dict:
        with self._lock:
            state = self.node.chain.state
            p = state.params
            return {
                "gas_fee": p.gas_fee,
                "default_min_increment": p.default_min_increment,
                "default_auction_duration": p.default_auction_duration,
                "bond_maturity_delta": p.bond_maturity_delta,
                "block_interval_ticks": p.block_interval_ticks,
                "authorities": [a.hex() for a in p.authorities],
                "authority_members": [m.hex() for m in p.authority_account.members],
                "authority_threshold": p.authority_account.threshold,
                "genesis_supply": total_funds(self.genesis_state),
            }

    def wallet_entries(self) -> list[dict]:
        if self.wallet is None:
            return []
        return [
            {"name": name, "address": self.wallet.address(name).hex()}
            for name in self.wallet.names()
        ]

    def tx_status(self, tx_id_hex: str) -> dict:
        tid = _parse_digest(tx_id_hex)
        with self._lock:
            if tid in self.node.mempool:
                return {"tx_id": tid.hex(), "status": "queued", "height": None, "receipt": None}
            found = self.node.chain.receipt_for(tid)
            if found is None:
                raise not_found(f"unknown transaction {tid.hex()}")
            height, receipt = found
            return {
                "tx_id": tid.hex(),
                "status": "accepted" if receipt.accepted else "rejected",
                "height": height,
                "receipt": receipt.to_json(),
            }


def _parse_addr(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise bad_request("address must be hex") from None
    if len(raw) != 20:
        raise bad_request("address must be 20 bytes")
    return raw


def _parse_digest(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise bad_request("id must be hex") from None
    if len(raw) != 32:
        raise bad_request("id must be 32 bytes")
    return raw
