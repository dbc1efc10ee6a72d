/**
 * Plain-data DOM descriptions.
 *
 * Views return trees of these nodes; tests walk the tree directly and the
 * browser entry point materializes it with `mount`. Handlers live on the
 * nodes so wiring stays declarative.
 */

export type Child = VNode | string;

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  on: Record<string, (ev: Event) => void>;
  children: Child[];
}

export interface HProps {
  [key: string]: string | number | boolean | ((ev: Event) => void) | undefined;
}

/** Build a node; `onclick`-style keys become handlers, the rest attributes. */
export function h(tag: string, props: HProps = {}, ...children: (Child | Child[] | null | undefined)[]): VNode {
  const attrs: Record<string, string> = {};
  const on: Record<string, (ev: Event) => void> = {};
  for (const [key, value] of Object.entries(props)) {
    if (value === undefined || value === false) continue;
    if (typeof value === "function" && key.startsWith("on")) {
      on[key.slice(2)] = value as (ev: Event) => void;
    } else {
      attrs[key] = value === true ? "" : String(value);
    }
  }
  const flat: Child[] = [];
  for (const child of children) {
    if (child === null || child === undefined) continue;
    if (Array.isArray(child)) flat.push(...child);
    else flat.push(child);
  }
  return { tag, attrs, on, children: flat };
}

export function walk(node: VNode, visit: (node: VNode) => void): void {
  visit(node);
  for (const child of node.children) {
    if (typeof child !== "string") walk(child, visit);
  }
}

export function findAll(node: VNode, pred: (node: VNode) => boolean): VNode[] {
  const hits: VNode[] = [];
  walk(node, (n) => {
    if (pred(n)) hits.push(n);
  });
  return hits;
}

export function findById(node: VNode, id: string): VNode | null {
  return findAll(node, (n) => n.attrs["id"] === id)[0] ?? null;
}

export function byClass(node: VNode, cls: string): VNode[] {
  return findAll(node, (n) => (n.attrs["class"] ?? "").split(/\s+/).includes(cls));
}

export function textOf(node: VNode): string {
  let out = "";
  walk(node, (n) => {
    for (const child of n.children) {
      if (typeof child === "string") out += child + " ";
    }
  });
  return out.trim();
}

const SVG_TAGS = new Set([
  "svg", "g", "path", "polygon", "polyline", "line", "rect", "circle",
  "ellipse", "text", "tspan", "defs", "marker", "title",
]);

const SVG_NS = "http://www.w3.org/2000/svg";

export function mount(node: VNode, doc: Document): Element {
  const el = SVG_TAGS.has(node.tag)
    ? doc.createElementNS(SVG_NS, node.tag)
    : doc.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) {
    el.setAttribute(key, value);
  }
  for (const [event, handler] of Object.entries(node.on)) {
    el.addEventListener(event, handler);
  }
  for (const child of node.children) {
    if (typeof child === "string") el.appendChild(doc.createTextNode(child));
    else el.appendChild(mount(child, doc));
  }
  return el;
}
