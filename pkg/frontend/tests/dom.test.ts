import { describe, expect, it } from "vitest";

import { byClass, findById, h, textOf } from "../src/dom";

describe("h", () => {
  it("separates attributes from event handlers", () => {
    const onclick = () => undefined;
    const node = h("button", { id: "b", disabled: true, hidden: false, onclick }, "go");
    expect(node.attrs).toEqual({ id: "b", disabled: "" });
    expect(node.on["click"]).toBe(onclick);
    expect(node.children).toEqual(["go"]);
  });

  it("flattens child arrays and drops null children", () => {
    const node = h("ul", {}, [h("li", {}, "a"), h("li", {}, "b")], null, undefined, "tail");
    expect(node.children).toHaveLength(3);
  });
});

describe("tree queries", () => {
  const tree = h(
    "div",
    { id: "root" },
    h("span", { class: "x y" }, "one"),
    h("div", {}, h("span", { class: "x", id: "inner" }, "two")),
  );

  it("byClass matches full class tokens only", () => {
    expect(byClass(tree, "x")).toHaveLength(2);
    expect(byClass(tree, "y")).toHaveLength(1);
    // "x" must not match as a substring of another token
    expect(byClass(h("i", { class: "xx" }), "x")).toHaveLength(0);
  });

  it("findById locates nested nodes", () => {
    expect(findById(tree, "inner")).not.toBeNull();
    expect(findById(tree, "nope")).toBeNull();
  });

  it("textOf concatenates nested text", () => {
    expect(textOf(tree)).toBe("one two");
  });
});
