"""Command-line surface: wallet keygen, genesis authoring, the live node,
the simulator, transaction building via a running node, log verification,
and lot tracing.

Transaction subcommands are thin clients: they send the unsigned document
to the node's wallet sign endpoint and submit the returned bytes, so all
canonical encoding stays server-side.  Exit codes: 0 success, 1 failed
operation or ApiError, 2 usage.
"""

import dataclasses
import json
import sys
from pathlib import Path

import click
import httpx

from .genesis import GenesisError, build_genesis_state, load_genesis, save_genesis
from .market import satisfaction_csv
from .simulator import ScenarioError, load_scenario, run
from .wallet import WalletError, WalletStore

DEFAULT_NODE = "http://127.0.0.1:8570"


class CliFailure(click.ClickException):
    """Failure reported on stderr; exits 1."""

    def __init__(self, message: str, payload: dict | None = None, as_json: bool = False):
        super().__init__(message)
        self.payload = payload or {"error": message}
        self.as_json = as_json

    def show(self, file=None) -> None:
        if self.as_json:
            click.echo(json.dumps(self.payload, indent=2), err=True)
        else:
            click.echo(f"error: {self.format_message()}", err=True)


def _emit(doc: dict, as_json: bool, human: str) -> None:
    if as_json:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _open_wallet(path: str, passphrase: str, create: bool = False) -> WalletStore:
    try:
        if create:
            return WalletStore.open_or_create(path, passphrase)
        return WalletStore.open(path, passphrase)
    except WalletError as exc:
        raise CliFailure(str(exc)) from exc


def _resolve_address(wallet: WalletStore | None, token: str) -> bytes:
    """A 40-hex-char token is an address; anything else is a wallet name."""
    if len(token) == 40:
        try:
            return bytes.fromhex(token)
        except ValueError:
            pass
    if wallet is None:
        raise CliFailure(f"cannot resolve {token!r} without a wallet")
    try:
        return wallet.address(token)
    except WalletError as exc:
        raise CliFailure(str(exc)) from exc


def _request(method: str, node: str, path: str, as_json: bool, body: dict | None = None) -> dict:
    try:
        with httpx.Client(base_url=node, timeout=30.0) as client:
            resp = client.request(method, path, json=body)
    except httpx.HTTPError as exc:
        raise CliFailure(f"cannot reach node at {node}: {exc}", as_json=as_json) from exc
    if resp.status_code >= 400:
        try:
            doc = resp.json()
            message = f"{doc.get('code', 'ERROR')}: {doc.get('message', '')}"
        except ValueError:
            doc = {"code": "INTERNAL", "message": resp.text}
            message = resp.text
        raise CliFailure(message, payload=doc, as_json=as_json)
    return resp.json()


def _sign_and_submit(node: str, signer: str, doc: dict, as_json: bool, wait: bool) -> None:
    signed = _request("POST", node, f"/v1/wallet/{signer}/sign", as_json, doc)
    result = _request("POST", node, "/v1/tx", as_json, {"hex": signed["hex"]})
    out = {"tx_id": result["tx_id"], "status": result["status"]}
    if wait:
        import time

        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            try:
                status = _request("GET", node, f"/v1/tx/{result['tx_id']}", as_json)
            except CliFailure:
                status = {"status": "queued"}
            if status["status"] != "queued":
                out = {
                    "tx_id": result["tx_id"],
                    "status": status["status"],
                    "receipt": status.get("receipt"),
                }
                break
            time.sleep(0.2)
    _emit(out, as_json, f"{out['tx_id']} {out['status']}")
    if out["status"] == "rejected":
        sys.exit(1)


wallet_option = click.option(
    "--wallet", "wallet_path", default="wallet.json", show_default=True, help="Wallet file path."
)
passphrase_option = click.option(
    "--passphrase",
    envvar="GX_WALLET_PASSPHRASE",
    prompt=True,
    hide_input=True,
    help="Wallet passphrase (or set GX_WALLET_PASSPHRASE).",
)
node_option = click.option(
    "--node", default=DEFAULT_NODE, show_default=True, help="Node base URL."
)
json_option = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
from_option = click.option("--from", "signer", required=True, help="Wallet key name to sign with.")
wait_option = click.option("--wait", is_flag=True, help="Poll until the receipt lands.")


@click.group()
@click.version_option(package_name="gridexchange")
def main() -> None:
    """Energy-lot auction chain tools."""


@main.command()
@click.option("--name", required=True, help="Name for the new key.")
@wallet_option
@passphrase_option
@json_option
def keygen(name: str, wallet_path: str, passphrase: str, as_json: bool) -> None:
    """Generate a named keypair in the wallet."""
    store = _open_wallet(wallet_path, passphrase, create=True)
    try:
        pair = store.generate(name)
    except WalletError as exc:
        raise CliFailure(str(exc), as_json=as_json) from exc
    _emit(
        {"name": name, "address": pair.address.hex()},
        as_json,
        f"{name} {pair.address.hex()}",
    )


# -- genesis -----------------------------------------------------------------


@main.group()
def genesis() -> None:
    """Genesis file authoring."""


@genesis.command("init")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output file.")
@click.option("--authority", "authorities", multiple=True, required=True, help="Producer name/address, in schedule order.")
@click.option("--balance", "balances", multiple=True, help="NAME=AMOUNT or ADDRESS=AMOUNT.")
@click.option("--qualify", "qualified", multiple=True, help="Trader name/address to approve.")
@click.option("--governor", "governors", multiple=True, help="Multisig member (default: the authorities).")
@click.option("--threshold", type=int, default=None, help="Multisig threshold (default: majority).")
@click.option("--gas-fee", type=int, default=None)
@click.option("--auction-duration", type=int, default=None)
@click.option("--min-increment", type=int, default=None)
@click.option("--bond-maturity", type=int, default=None)
@click.option("--block-interval", type=int, default=None)
@wallet_option
@passphrase_option
@json_option
def genesis_init(
    out: str,
    authorities: tuple[str, ...],
    balances: tuple[str, ...],
    qualified: tuple[str, ...],
    governors: tuple[str, ...],
    threshold: int | None,
    gas_fee: int | None,
    auction_duration: int | None,
    min_increment: int | None,
    bond_maturity: int | None,
    block_interval: int | None,
    wallet_path: str,
    passphrase: str,
    as_json: bool,
) -> None:
    """Write a genesis file from wallet names and amounts."""
    store = _open_wallet(wallet_path, passphrase) if Path(wallet_path).exists() else None
    auth_addrs = [_resolve_address(store, a) for a in authorities]
    member_names = governors or authorities
    members = tuple(sorted({_resolve_address(store, g) for g in member_names}))
    if threshold is None:
        threshold = len(members) // 2 + 1

    balance_map: dict[bytes, int] = {}
    for item in balances:
        name, _, amount = item.partition("=")
        if not amount:
            raise click.UsageError(f"--balance must be NAME=AMOUNT, got {item!r}")
        balance_map[_resolve_address(store, name)] = int(amount)

    from .crypto import MultisigAccount

    overrides = {
        k: v
        for k, v in {
            "gas_fee": gas_fee,
            "default_auction_duration": auction_duration,
            "default_min_increment": min_increment,
            "bond_maturity_delta": bond_maturity,
            "block_interval_ticks": block_interval,
        }.items()
        if v is not None
    }
    try:
        state = build_genesis_state(
            auth_addrs,
            MultisigAccount(members=members, threshold=threshold),
            balance_map,
            {_resolve_address(store, q) for q in qualified},
            **overrides,
        )
    except (GenesisError, ValueError) as exc:
        raise CliFailure(str(exc), as_json=as_json) from exc
    save_genesis(out, state)
    _emit(
        {"out": out, "authorities": [a.hex() for a in auth_addrs]},
        as_json,
        f"wrote {out} ({len(auth_addrs)} authorities, supply {sum(balance_map.values())})",
    )


# -- node ----------------------------------------------------------------------


@main.group()
def node() -> None:
    """Run and inspect a live node."""


@node.command("run")
@click.option("--genesis", "genesis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--listen", default="127.0.0.1:8570", show_default=True, help="HOST:PORT to bind.")
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False), help="Block log file.")
@click.option("--key", "key_name", default=None, help="Wallet key to produce blocks with.")
@click.option("--tick-seconds", type=float, default=0.5, show_default=True)
@wallet_option
@click.option(
    "--passphrase",
    envvar="GX_WALLET_PASSPHRASE",
    default=None,
    help="Wallet passphrase; prompted when a wallet exists and none is given.",
)
def node_run(
    genesis_path: str,
    listen: str,
    log_path: str,
    key_name: str | None,
    tick_seconds: float,
    wallet_path: str,
    passphrase: str | None,
) -> None:
    """Serve the HTTP API, producing blocks when scheduled."""
    import uvicorn

    from .service import NodeRuntime, create_app

    try:
        genesis_state = load_genesis(genesis_path)
    except GenesisError as exc:
        raise CliFailure(str(exc)) from exc

    store = None
    if Path(wallet_path).exists():
        if passphrase is None:
            passphrase = click.prompt("Passphrase", hide_input=True)
        store = _open_wallet(wallet_path, passphrase)
    keypair = None
    if key_name is not None:
        if store is None:
            raise CliFailure(f"--key {key_name!r} needs a wallet file")
        try:
            keypair = store.get(key_name)
        except WalletError as exc:
            raise CliFailure(str(exc)) from exc

    host, _, port_text = listen.partition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise click.UsageError(f"--listen must be HOST:PORT, got {listen!r}") from None

    runtime = NodeRuntime(
        genesis_state,
        keypair=keypair,
        wallet=store,
        log_path=log_path,
        tick_seconds=tick_seconds,
    )
    runtime.start()
    click.echo(f"node listening on http://{host}:{port}, log {log_path}", err=True)
    try:
        uvicorn.run(create_app(runtime), host=host, port=port, log_level="warning")
    finally:
        runtime.stop()


# -- simulator -------------------------------------------------------------------


@main.group()
def sim() -> None:
    """Deterministic multi-node simulations."""


@sim.command("run")
@click.option("--scenario", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write satisfaction CSV.")
@json_option
def sim_run(scenario: str, seed: int | None, report_path: str, csv_path: str | None, as_json: bool) -> None:
    """Run a scenario and write its report."""
    try:
        config = load_scenario(scenario)
    except ScenarioError as exc:
        raise CliFailure(str(exc), as_json=as_json) from exc
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    report = run(config)
    Path(report_path).write_bytes(report.json_bytes())
    if csv_path is not None:
        Path(csv_path).write_text(satisfaction_csv(report.satisfaction))
    doc = report.to_json()
    heads = {n["head_hash"] for n in doc["nodes"]}
    summary = {
        "report": report_path,
        "seed": doc["seed"],
        "ticks": doc["ticks"],
        "head_height": doc["nodes"][0]["head_height"],
        "converged": len(heads) == 1,
        "settled": doc["satisfaction"]["totals"]["settled"],
        "discarded": doc["satisfaction"]["totals"]["discarded"],
    }
    _emit(
        summary,
        as_json,
        "seed {seed}: {ticks} ticks, height {head_height}, converged={converged}, "
        "settled={settled}, discarded={discarded} -> {report}".format(**summary),
    )


# -- transactions ------------------------------------------------------------------


@main.group()
def tx() -> None:
    """Build, sign and submit transactions through a node."""


def _tx_command(name: str):
    def wrap(fn):
        fn = wait_option(fn)
        fn = json_option(fn)
        fn = node_option(fn)
        fn = from_option(fn)
        return tx.command(name)(fn)

    return wrap


@_tx_command("transfer")
@click.option("--to", required=True, help="Recipient address (hex).")
@click.option("--amount", type=int, required=True)
def tx_transfer(signer: str, node: str, as_json: bool, wait: bool, to: str, amount: int) -> None:
    """Send currency."""
    _sign_and_submit(node, signer, {"kind": "transfer", "to": to, "amount": amount}, as_json, wait)


@_tx_command("mint-lot")
@click.option("--kwh", type=int, required=True)
def tx_mint_lot(signer: str, node: str, as_json: bool, wait: bool, kwh: int) -> None:
    """Mint an energy lot from generation."""
    _sign_and_submit(node, signer, {"kind": "mint_lot", "kwh": kwh}, as_json, wait)


@_tx_command("open-auction")
@click.option("--lot", "lot_id", required=True, help="Lot id (hex).")
@click.option("--base-price", type=int, required=True)
@click.option("--min-increment", type=int, default=None)
@click.option("--duration", "duration_blocks", type=int, default=None, help="Bidding window in blocks.")
@click.option("--mode", type=click.Choice(["cash", "bond"]), default="cash", show_default=True)
def tx_open_auction(
    signer: str,
    node: str,
    as_json: bool,
    wait: bool,
    lot_id: str,
    base_price: int,
    min_increment: int | None,
    duration_blocks: int | None,
    mode: str,
) -> None:
    """Offer a lot for auction (charges the gas fee)."""
    doc: dict = {"kind": "open_auction", "lot_id": lot_id, "base_price": base_price, "mode": mode}
    if min_increment is not None:
        doc["min_increment"] = min_increment
    if duration_blocks is not None:
        doc["duration_blocks"] = duration_blocks
    _sign_and_submit(node, signer, doc, as_json, wait)


@_tx_command("bid")
@click.option("--auction", "auction_id", required=True, help="Auction id (hex).")
@click.option("--amount", type=int, required=True)
def tx_bid(signer: str, node: str, as_json: bool, wait: bool, auction_id: str, amount: int) -> None:
    """Place an escrowed bid."""
    _sign_and_submit(
        node, signer, {"kind": "place_bid", "auction_id": auction_id, "amount": amount}, as_json, wait
    )


@_tx_command("transfer-lot")
@click.option("--to", required=True, help="Recipient address (hex).")
@click.option("--lot", "lot_id", required=True, help="Lot id (hex).")
def tx_transfer_lot(signer: str, node: str, as_json: bool, wait: bool, to: str, lot_id: str) -> None:
    """Hand an unlocked lot to another owner."""
    _sign_and_submit(
        node, signer, {"kind": "transfer_lot", "to": to, "lot_id": lot_id}, as_json, wait
    )


@_tx_command("transfer-bond")
@click.option("--to", required=True, help="Recipient address (hex).")
@click.option("--bond", "bond_id", required=True, help="Bond id (hex).")
def tx_transfer_bond(signer: str, node: str, as_json: bool, wait: bool, to: str, bond_id: str) -> None:
    """Hand a bond to another holder."""
    _sign_and_submit(
        node, signer, {"kind": "transfer_bond", "to": to, "bond_id": bond_id}, as_json, wait
    )


@_tx_command("redeem-bond")
@click.option("--bond", "bond_id", required=True, help="Bond id (hex).")
def tx_redeem_bond(signer: str, node: str, as_json: bool, wait: bool, bond_id: str) -> None:
    """Redeem a mature bond against its issuer."""
    _sign_and_submit(node, signer, {"kind": "redeem_bond", "bond_id": bond_id}, as_json, wait)


@_tx_command("registry-update")
@click.option("--add", "add", multiple=True, help="Address (hex) to qualify.")
@click.option("--remove", "remove", multiple=True, help="Address (hex) to disqualify.")
@click.option("--signer", "co_signers", multiple=True, help="Additional wallet key names to co-sign.")
def tx_registry_update(
    signer: str,
    node: str,
    as_json: bool,
    wait: bool,
    add: tuple[str, ...],
    remove: tuple[str, ...],
    co_signers: tuple[str, ...],
) -> None:
    """Change the qualification registry (authority multisig)."""
    doc = {
        "kind": "registry_update",
        "add": list(add),
        "remove": list(remove),
        "signers": list(co_signers),
    }
    _sign_and_submit(node, signer, doc, as_json, wait)


# -- verification and tracing ---------------------------------------------------------


@main.group()
def chain() -> None:
    """Offline chain checks."""


@chain.command("verify")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--genesis", "genesis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@json_option
def chain_verify(log_path: str, genesis_path: str, as_json: bool) -> None:
    """Re-verify every byte of a block log against genesis."""
    from .chain import verify_log

    try:
        genesis_state = load_genesis(genesis_path)
    except GenesisError as exc:
        raise CliFailure(str(exc), as_json=as_json) from exc
    result = verify_log(log_path, genesis_state)
    doc = {"ok": result.ok, "blocks": result.blocks, "error": result.error}
    if result.ok:
        _emit(doc, as_json, f"ok: {result.blocks} blocks")
    else:
        raise CliFailure(f"verification failed: {result.error}", payload=doc, as_json=as_json)


@main.group()
def trace() -> None:
    """Provenance queries."""


@trace.command("lot")
@click.argument("lot_id")
@node_option
@json_option
def trace_lot_cmd(lot_id: str, node: str, as_json: bool) -> None:
    """Show a lot's full event history from mint onward."""
    doc = _request("GET", node, f"/v1/lots/{lot_id}/trace", as_json)
    if as_json:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))
        return
    click.echo(f"lot {doc['lot_id']} ({doc['kwh']} kWh) owner {doc['owner']}")
    for event in doc["events"]:
        fields = " ".join(f"{k}={v}" for k, v in event.items() if k != "kind")
        click.echo(f"  {event['kind']}: {fields}")


if __name__ == "__main__":
    main()
