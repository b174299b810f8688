"""Genesis configuration: the JSON document a network starts from.

The document fixes the authority schedule, the authority multisig account,
initial balances, the qualified-trader set, and protocol parameters.  The
address scheme (20 bytes, two hash rounds) is part of the protocol and is
spelled out in the document; loading rejects any other values rather than
silently producing an incompatible chain.
"""

import json
from pathlib import Path

from .crypto import ADDRESS_HASH_ROUNDS, ADDRESS_LEN, MultisigAccount
from .model import Account, ChainState, ProtocolParams

DEFAULT_GAS_FEE = 10
DEFAULT_MIN_INCREMENT = 1
DEFAULT_AUCTION_DURATION = 20
DEFAULT_BOND_MATURITY_DELTA = 100
DEFAULT_BLOCK_INTERVAL_TICKS = 5

# Deadline/maturity arithmetic must stay inside u64; see contracts.
MAX_BLOCKS_PARAM = 1 << 32


class GenesisError(ValueError):
    """Genesis document malformed or incompatible with this node."""


def _parse_address(value: object, what: str) -> bytes:
    if not isinstance(value, str):
        raise GenesisError(f"{what}: expected hex string, got {type(value).__name__}")
    try:
        raw = bytes.fromhex(value)
    except ValueError as exc:
        raise GenesisError(f"{what}: invalid hex {value!r}") from exc
    if len(raw) != ADDRESS_LEN:
        raise GenesisError(f"{what}: expected {ADDRESS_LEN} bytes, got {len(raw)}")
    return raw


def _parse_amount(value: object, what: str, minimum: int = 0) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise GenesisError(f"{what}: expected integer, got {type(value).__name__}")
    if value < minimum:
        raise GenesisError(f"{what}: must be at least {minimum}, got {value}")
    return value


def build_genesis_state(
    authorities: list[bytes],
    authority_account: MultisigAccount,
    balances: dict[bytes, int],
    qualified: set[bytes],
    *,
    gas_fee: int = DEFAULT_GAS_FEE,
    default_min_increment: int = DEFAULT_MIN_INCREMENT,
    default_auction_duration: int = DEFAULT_AUCTION_DURATION,
    bond_maturity_delta: int = DEFAULT_BOND_MATURITY_DELTA,
    block_interval_ticks: int = DEFAULT_BLOCK_INTERVAL_TICKS,
) -> ChainState:
    if not authorities:
        raise GenesisError("authorities: must not be empty")
    params = ProtocolParams(
        gas_fee=gas_fee,
        default_min_increment=default_min_increment,
        default_auction_duration=default_auction_duration,
        bond_maturity_delta=bond_maturity_delta,
        authority_account=authority_account,
        authorities=tuple(authorities),
        block_interval_ticks=block_interval_ticks,
    )
    _check_params(params)
    accounts = {addr: Account(balance=amount, nonce=0) for addr, amount in balances.items()}
    return ChainState(
        accounts=accounts,
        auctions={},
        lots={},
        bonds={},
        qualified=frozenset(qualified),
        params=params,
    )


def _check_params(params: ProtocolParams) -> None:
    if params.gas_fee < 0:
        raise GenesisError("gas_fee: must be non-negative")
    if params.default_min_increment < 1:
        raise GenesisError("default_min_increment: must be at least 1")
    if not 1 <= params.default_auction_duration <= MAX_BLOCKS_PARAM:
        raise GenesisError("default_auction_duration: out of range")
    if not 1 <= params.bond_maturity_delta <= MAX_BLOCKS_PARAM:
        raise GenesisError("bond_maturity_delta: out of range")
    if params.block_interval_ticks < 1:
        raise GenesisError("block_interval_ticks: must be at least 1")


def genesis_from_json(doc: dict) -> ChainState:
    if not isinstance(doc, dict):
        raise GenesisError("genesis document must be a JSON object")

    raw_params = doc.get("params", {})
    if not isinstance(raw_params, dict):
        raise GenesisError("params: must be an object")
    address_bytes = raw_params.get("address_bytes", ADDRESS_LEN)
    address_rounds = raw_params.get("address_hash_rounds", ADDRESS_HASH_ROUNDS)
    if address_bytes != ADDRESS_LEN or address_rounds != ADDRESS_HASH_ROUNDS:
        raise GenesisError(
            "unsupported address scheme: this node derives "
            f"{ADDRESS_LEN}-byte addresses with {ADDRESS_HASH_ROUNDS} hash rounds"
        )

    authorities = doc.get("authorities")
    if not isinstance(authorities, list) or not authorities:
        raise GenesisError("authorities: must be a non-empty list")
    authority_addrs = [_parse_address(a, f"authorities[{i}]") for i, a in enumerate(authorities)]

    account_doc = doc.get("authority_account")
    if not isinstance(account_doc, dict):
        raise GenesisError("authority_account: must be an object")
    members = account_doc.get("members")
    if not isinstance(members, list):
        raise GenesisError("authority_account.members: must be a list")
    member_addrs = tuple(
        _parse_address(m, f"authority_account.members[{i}]") for i, m in enumerate(members)
    )
    threshold = _parse_amount(account_doc.get("threshold"), "authority_account.threshold", 1)
    try:
        authority_account = MultisigAccount(members=member_addrs, threshold=threshold)
    except ValueError as exc:
        raise GenesisError(f"authority_account: {exc}") from exc

    balances_doc = doc.get("balances", {})
    if not isinstance(balances_doc, dict):
        raise GenesisError("balances: must be an object")
    balances = {
        _parse_address(addr, "balances key"): _parse_amount(amount, f"balances[{addr}]")
        for addr, amount in balances_doc.items()
    }

    qualified_doc = doc.get("qualified", [])
    if not isinstance(qualified_doc, list):
        raise GenesisError("qualified: must be a list")
    qualified = {_parse_address(a, f"qualified[{i}]") for i, a in enumerate(qualified_doc)}

    return build_genesis_state(
        authorities=authority_addrs,
        authority_account=authority_account,
        balances=balances,
        qualified=qualified,
        gas_fee=_parse_amount(raw_params.get("gas_fee", DEFAULT_GAS_FEE), "gas_fee"),
        default_min_increment=_parse_amount(
            raw_params.get("default_min_increment", DEFAULT_MIN_INCREMENT),
            "default_min_increment",
            1,
        ),
        default_auction_duration=_parse_amount(
            raw_params.get("default_auction_duration", DEFAULT_AUCTION_DURATION),
            "default_auction_duration",
            1,
        ),
        bond_maturity_delta=_parse_amount(
            raw_params.get("bond_maturity_delta", DEFAULT_BOND_MATURITY_DELTA),
            "bond_maturity_delta",
            1,
        ),
        block_interval_ticks=_parse_amount(
            raw_params.get("block_interval_ticks", DEFAULT_BLOCK_INTERVAL_TICKS),
            "block_interval_ticks",
            1,
        ),
    )


def genesis_to_json(state: ChainState) -> dict:
    params = state.params
    return {
        "params": {
            "gas_fee": params.gas_fee,
            "default_min_increment": params.default_min_increment,
            "default_auction_duration": params.default_auction_duration,
            "bond_maturity_delta": params.bond_maturity_delta,
            "block_interval_ticks": params.block_interval_ticks,
            "address_bytes": ADDRESS_LEN,
            "address_hash_rounds": ADDRESS_HASH_ROUNDS,
        },
        "authorities": [a.hex() for a in params.authorities],
        "authority_account": {
            "members": [m.hex() for m in params.authority_account.members],
            "threshold": params.authority_account.threshold,
        },
        "balances": {addr.hex(): acct.balance for addr, acct in sorted(state.accounts.items())},
        "qualified": sorted(a.hex() for a in state.qualified),
    }


def load_genesis(path: str | Path) -> ChainState:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GenesisError(f"genesis file is not valid JSON: {exc}") from exc
    return genesis_from_json(doc)


def save_genesis(path: str | Path, state: ChainState) -> None:
    Path(path).write_text(json.dumps(genesis_to_json(state), indent=2, sort_keys=True) + "\n")
