/**
 * Browser entry point.  The node URL comes from ?node=...; the default is
 * the page's own origin, which is what `node serve.mjs` proxies.
 */

import { createApp } from "./app.js";

const mount = document.getElementById("app");
if (mount === null) throw new Error("missing #app mount point");

const nodeUrl = new URLSearchParams(window.location.search).get("node") ?? "";
createApp({ mount, nodeUrl });
