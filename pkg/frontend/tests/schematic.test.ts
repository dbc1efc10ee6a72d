import { describe, expect, it } from "vitest";

import {
  attributionFill,
  lymphGroupName,
  rateFill,
  DLT_REGIONS,
  LN_REGIONS,
  SUBSITE_REGIONS,
} from "../src/schematic";
import { altResponseFixture, schemaFixture } from "./helpers";

describe("lymph node regions", () => {
  it("has one region per model flag, indexes 0-13", () => {
    expect(LN_REGIONS).toHaveLength(14);
    expect(new Set(LN_REGIONS.map((r) => r.id)).size).toBe(14);
    expect(LN_REGIONS.map((r) => r.index).sort((a, b) => a - b)).toEqual(
      Array.from({ length: 14 }, (_, i) => i),
    );
  });

  it("shows eight regions per side: six lateral levels plus two shared midline", () => {
    const left = LN_REGIONS.filter((r) => r.id.startsWith("ln-L-"));
    const right = LN_REGIONS.filter((r) => r.id.startsWith("ln-R-"));
    const midline = LN_REGIONS.filter((r) => ["ln-IA", "ln-VI"].includes(r.id));
    expect(left).toHaveLength(6);
    expect(right).toHaveLength(6);
    expect(midline).toHaveLength(2);
    expect(left.length + midline.length).toBe(8);
    // both sides carry the same level set
    const levels = (rs: typeof left) => rs.map((r) => r.id.split("-")[2]).sort();
    expect(levels(left)).toEqual(levels(right));
  });

  it("maps each flag to the attribution group the service reports", () => {
    expect(lymphGroupName(0)).toBe("ln_01");
    expect(lymphGroupName(13)).toBe("ln_14");
    const contributions = altResponseFixture.policy.attribution.contributions;
    for (const region of LN_REGIONS) {
      expect(contributions).toHaveProperty(lymphGroupName(region.index));
    }
  });
});

describe("subsite and toxicity regions", () => {
  it("subsite regions follow the schema's category order", () => {
    expect(SUBSITE_REGIONS).toHaveLength(6);
    SUBSITE_REGIONS.forEach((region, i) => {
      expect(region.index).toBe(i);
      expect(region.id).toBe(`sub-${schemaFixture.subsites[i]}`);
    });
  });

  it("toxicity regions follow the schema's kind order", () => {
    expect(DLT_REGIONS).toHaveLength(5);
    DLT_REGIONS.forEach((region, i) => {
      expect(region.index).toBe(i);
      expect(region.id).toBe(`dlt-${schemaFixture.dlt_kinds[i]}`);
    });
  });

  it("every region is a drawable polygon", () => {
    for (const region of [...LN_REGIONS, ...SUBSITE_REGIONS, ...DLT_REGIONS]) {
      const points = region.points.split(" ");
      expect(points.length).toBeGreaterThanOrEqual(3);
      for (const point of points) {
        const [x, y] = point.split(",").map(Number);
        expect(Number.isFinite(x)).toBe(true);
        expect(Number.isFinite(y)).toBe(true);
      }
    }
  });
});

describe("fills", () => {
  it("attribution fill diverges by sign and saturates by magnitude", () => {
    expect(attributionFill(undefined)).toBe("rgba(0,0,0,0)");
    expect(attributionFill(0)).toBe("rgba(0,0,0,0)");
    expect(attributionFill(0.075)).toBe("rgba(178,24,43,0.500)");
    expect(attributionFill(-0.075)).toBe("rgba(33,102,172,0.500)");
    expect(attributionFill(0.5)).toBe("rgba(178,24,43,1.000)");
  });

  it("rate fill is transparent at zero and opaque at one", () => {
    expect(rateFill(0)).toBe("rgba(60,60,60,0.000)");
    expect(rateFill(1)).toBe("rgba(60,60,60,1.000)");
    expect(rateFill(2)).toBe("rgba(60,60,60,1.000)");
  });
});
