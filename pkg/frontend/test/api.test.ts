import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { formatPercent } from "../src/format.js";

const KEY = { subject: "a", relation: "hascolor", object: "white", doc_id: "d" };

function stubFetch(status: number, body: unknown = null): void {
  vi.stubGlobal(
    "fetch",
    vi.fn(async () =>
      body === null
        ? new Response(null, { status })
        : new Response(JSON.stringify(body), { status, headers: { "Content-Type": "application/json" } }),
    ),
  );
}

afterEach(() => vi.unstubAllGlobals());

describe("ApiClient", () => {
  it("treats 204 from next as completion", async () => {
    stubFetch(204);
    expect(await new ApiClient("").next("s")).toEqual({ done: true });
  });

  it("returns the card payload from next", async () => {
    const card = { triple_key: KEY, excerpt: "x", progress: { completed: 0, total: 1 } };
    stubFetch(200, card);
    expect(await new ApiClient("").next("s")).toEqual({ done: false, card });
  });

  it("maps 409 to a duplicate outcome", async () => {
    stubFetch(409, { detail: "dup" });
    expect(await new ApiClient("").submitVerdict("s", KEY, "correct", "")).toBe("duplicate");
  });

  it("sends the triple key as a four-element array", async () => {
    stubFetch(204);
    await new ApiClient("").submitVerdict("s", KEY, "incorrect", "why");
    const init = (fetch as ReturnType<typeof vi.fn>).mock.calls[0][1] as RequestInit;
    expect(JSON.parse(String(init.body))).toEqual({
      triple_key: ["a", "hascolor", "white", "d"],
      label: "incorrect",
      justification: "why",
    });
  });

  it("throws ApiError on server failures", async () => {
    stubFetch(500, { detail: "boom" });
    await expect(new ApiClient("").submitVerdict("s", KEY, "correct", "")).rejects.toBeInstanceOf(ApiError);
  });

  it("returns null for a missing judge report", async () => {
    stubFetch(404, { detail: "none" });
    expect(await new ApiClient("").judgeReport("r")).toBeNull();
  });
});

describe("formatPercent", () => {
  it("rounds to one decimal at display time", () => {
    expect(formatPercent(96.56241194702733)).toBe("96.6");
    expect(formatPercent(0.9580163426317272)).toBe("1.0");
    expect(formatPercent(2.479571710340941)).toBe("2.5");
    expect(formatPercent(0)).toBe("0.0");
  });
});
