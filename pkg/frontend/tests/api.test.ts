import { describe, expect, it } from "vitest";

import { editImageUrl, parseLossLog, renderImageUrl } from "../src/api";

describe("parseLossLog", () => {
  it("parses line-delimited records", () => {
    const text =
      '{"phase":"fit","iteration":0,"view_id":3,"loss":0.5,"components":{"l1":0.1,"perceptual":0.4,"loss2":null,"loss3":null},"direction":null}\n' +
      '{"phase":"propagate","iteration":0,"view_id":1,"loss":0.9,"components":{"l1":0.1,"perceptual":0.2,"loss2":0.3,"loss3":0.3},"direction":"forward"}\n';
    const records = parseLossLog(text);
    expect(records).toHaveLength(2);
    expect(records[0].phase).toBe("fit");
    expect(records[1].direction).toBe("forward");
  });

  it("skips blank and truncated lines", () => {
    const text = '\n{"phase":"fit","iteration":0,"view_id":0,"loss":0.1';
    expect(parseLossLog(text)).toEqual([]);
  });

  it("empty text gives no records", () => {
    expect(parseLossLog("")).toEqual([]);
  });
});

describe("image urls", () => {
  it("point at the session image endpoints", () => {
    expect(editImageUrl(3)).toBe("/api/images/edits/view3.png");
    expect(renderImageUrl(0)).toBe("/api/images/renders/view0.png");
  });
});
