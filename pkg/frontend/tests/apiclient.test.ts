import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("parses the session manifest", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => jsonResponse({ phase: "created", prompt: "x" }))
    );
    const session = await new ApiClient().session();
    expect(session.phase).toBe("created");
  });

  it("surfaces server error details verbatim", async () => {
    const detail =
      "override image shape 16x16 does not match view resolution 32x32";
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => jsonResponse({ detail }, 400))
    );
    await expect(new ApiClient().selectGt(1)).rejects.toThrow(detail);
  });

  it("falls back to the status code for non-JSON errors", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response("boom", { status: 500 }))
    );
    await expect(new ApiClient().startPhase("fit")).rejects.toThrow("500");
  });

  it("posts multipart form data for GT selection with upload", async () => {
    const calls: RequestInit[] = [];
    vi.stubGlobal(
      "fetch",
      vi.fn(async (_url: string, init?: RequestInit) => {
        if (init) calls.push(init);
        return jsonResponse({ gt_view_id: 2 });
      })
    );
    const file = new File([new Uint8Array([1, 2, 3])], "edit.png", {
      type: "image/png",
    });
    await new ApiClient().selectGt(2, undefined, file);
    expect(calls).toHaveLength(1);
    const body = calls[0].body as FormData;
    expect(body.get("view_id")).toBe("2");
    expect(body.get("image")).toBeInstanceOf(File);
  });

  it("requests the loss log from an offset", async () => {
    const urls: string[] = [];
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) => {
        urls.push(url);
        return new Response("", { status: 200 });
      })
    );
    await new ApiClient().lossLog(30);
    expect(urls[0]).toBe("/api/losslog?start=30");
  });
});
