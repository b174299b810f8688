/** Display helpers.  Formatting only; no values are computed here. */

/** Shorten a hex id for tables; full value belongs in a title attribute. */
export function shortHex(hex: string): string {
  if (hex.length <= 12) return hex;
  return `${hex.slice(0, 8)}…${hex.slice(-4)}`;
}

export function fmtMode(mode: "cash" | "bond"): string {
  return mode === "bond" ? "bond" : "cash";
}

export function fmtStatus(status: "open" | "settled" | "discarded"): string {
  return status.charAt(0).toUpperCase() + status.slice(1);
}

/** Render one chain event as "kind  k=v k=v" without touching the values. */
export function fmtEvent(event: { kind: string; [key: string]: unknown }): string {
  const fields = Object.entries(event)
    .filter(([key]) => key !== "kind")
    .map(([key, value]) => `${key}=${String(value)}`)
    .join(" ");
  return fields.length > 0 ? `${event.kind}  ${fields}` : event.kind;
}
