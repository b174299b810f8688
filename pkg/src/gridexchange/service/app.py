"""FastAPI application over a NodeRuntime.

Thin by design: every handler delegates to a runtime snapshot method and
lets the ApiError handler shape failures into the {code, message} envelope.
The event stream replays the runtime's append-only feed, so sequence
numbers are strictly increasing with no gaps for any connection.
"""

import asyncio
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .runtime import ApiError, NodeRuntime
from .schemas import (
    AccountOut,
    ApiErrorOut,
    AuctionDetailOut,
    AuctionRowOut,
    BlockOut,
    BondOut,
    HeadOut,
    LotTraceOut,
    ParamsOut,
    SignIn,
    SignOut,
    TxStatusOut,
    TxSubmitIn,
    TxSubmitOut,
    WalletEntryOut,
)

_EVENT_POLL_SECONDS = 0.05


def create_app(runtime: NodeRuntime) -> FastAPI:
    app = FastAPI(title="gridexchange node", version="1.0")
    app.state.runtime = runtime

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        body = ApiErrorOut(code=exc.code, message=exc.message)
        return JSONResponse(status_code=exc.http_status, content=body.model_dump())

    @app.get("/v1/chain/head", response_model=HeadOut)
    def chain_head():
        return runtime.head()

    @app.get("/v1/blocks/{height}", response_model=BlockOut)
    def block(height: int):
        return runtime.block(height)

    @app.get("/v1/accounts/{addr}", response_model=AccountOut)
    def account(addr: str):
        return runtime.account(addr)

    @app.get("/v1/auctions", response_model=list[AuctionRowOut])
    def auctions(status: str | None = None):
        return runtime.auctions(status)

    @app.get("/v1/auctions/{auction_id}", response_model=AuctionDetailOut)
    def auction(auction_id: str):
        return runtime.auction(auction_id)

    @app.get("/v1/lots/{lot_id}/trace", response_model=LotTraceOut)
    def lot_trace(lot_id: str):
        return runtime.lot_trace(lot_id)

    @app.get("/v1/bonds/{bond_id}", response_model=BondOut)
    def bond(bond_id: str):
        return runtime.bond(bond_id)

    @app.get("/v1/params", response_model=ParamsOut)
    def params():
        return runtime.params()

    @app.get("/v1/wallets", response_model=list[WalletEntryOut])
    def wallets():
        return runtime.wallet_entries()

    @app.get("/v1/tx/{tx_id}", response_model=TxStatusOut)
    def tx_status(tx_id: str):
        return runtime.tx_status(tx_id)

    @app.post("/v1/tx", response_model=TxSubmitOut)
    def submit_tx(body: TxSubmitIn):
        return runtime.submit_tx(body.hex)

    @app.post("/v1/wallet/{name}/sign", response_model=SignOut)
    def sign(name: str, body: SignIn):
        return runtime.sign_tx(name, body.model_dump(exclude_none=True))

    @app.get("/v1/events")
    async def events(since: int = -1):
        # The server cancels this generator when the client disconnects.
        async def stream():
            last = since
            while True:
                batch = runtime.events_since(last)
                for event in batch:
                    last = event["seq"]
                    name = event["event"]
                    yield f"id: {event['seq']}\nevent: {name}\ndata: {json.dumps(event)}\n\n"
                if not batch:
                    await asyncio.sleep(_EVENT_POLL_SECONDS)

        headers = {"Cache-Control": "no-cache", "Connection": "keep-alive"}
        return StreamingResponse(stream(), media_type="text/event-stream", headers=headers)

    return app
