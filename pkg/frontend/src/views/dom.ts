/**
 * Tiny element builder.  Attributes starting with "on" become listeners,
 * "value" is set as a property so controlled inputs behave, everything else
 * is a plain attribute.  Children are nodes or text; null children are
 * skipped so callers can express conditionals inline.
 */

type Child = Node | string | null;
type AttrValue = string | boolean | ((event: Event) => void);

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, AttrValue> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.slice(2), value);
    } else if (key === "value") {
      (node as HTMLInputElement).value = String(value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null) continue;
    node.append(child);
  }
  return node;
}

export function text(value: string | number): Text {
  return document.createTextNode(String(value));
}
