/** State machine unit tests with a hand-controlled fake service. */

import { describe, expect, it } from "vitest";

import { ApiError, SuggestClient, SuggestResponse } from "../src/api.js";
import { PlaygroundSession, SessionState } from "../src/session.js";

type Pending = {
  line: string;
  resolve: (value: SuggestResponse) => void;
  reject: (reason: unknown) => void;
};

/** A SuggestClient whose responses resolve only when the test says so. */
class FakeClient extends SuggestClient {
  pending: Pending[] = [];

  constructor() {
    super("http://fake");
  }

  override suggest(line: string): Promise<SuggestResponse> {
    return new Promise((resolve, reject) => {
      this.pending.push({ line, resolve, reject });
    });
  }
}

function response(lines: string[], oov = false): SuggestResponse {
  return {
    oov,
    suggestions: lines.map((line, i) => ({ line, distance: i * 0.5, rank: i + 1 })),
  };
}

function makeSession() {
  const client = new FakeClient();
  const states: SessionState[] = [];
  const session = new PlaygroundSession(client, (s) => states.push(s));
  return { client, states, session };
}

const tick = () => new Promise((r) => setTimeout(r, 0));

describe("request lifecycle", () => {
  it("renders suggestions in rank order when the reply lands", async () => {
    const { client, session } = makeSession();
    const done = session.commitLine("a = 1");
    expect(session.getState().status).toBe("loading");
    client.pending[0].resolve(response(["b = 2", "c = 3"]));
    await done;
    const state = session.getState();
    expect(state.status).toBe("ready");
    expect(state.suggestions.map((s) => s.rank)).toEqual([1, 2]);
    expect(state.suggestions[0].line).toBe("b = 2");
  });

  it("discards a stale reply that resolves after a newer commit", async () => {
    const { client, session } = makeSession();
    const first = session.commitLine("first()");
    const second = session.commitLine("second()");
    expect(client.pending.length).toBe(2);
    // the newer reply lands first...
    client.pending[1].resolve(response(["after second"]));
    await second;
    expect(session.getState().suggestions[0].line).toBe("after second");
    // ...then the stale one must be ignored
    client.pending[0].resolve(response(["after first"]));
    await first;
    expect(session.getState().suggestions[0].line).toBe("after second");
  });

  it("does not issue overlapping requests for the same committed line", () => {
    const { client, session } = makeSession();
    void session.commitLine("same()");
    void session.commitLine("same()");
    expect(client.pending.length).toBe(1);
  });

  it("a blank commit clears the list without calling the service", () => {
    const { client, session } = makeSession();
    void session.commitLine("   ");
    expect(client.pending.length).toBe(0);
    expect(session.getState().status).toBe("idle");
    expect(session.getState().suggestions).toEqual([]);
  });

  it("shows the OOV badge flag from the response", async () => {
    const { client, session } = makeSession();
    const done = session.commitLine("weird_line()");
    client.pending[0].resolve(response(["known()"], true));
    await done;
    expect(session.getState().oov).toBe(true);
  });
});

describe("error handling", () => {
  it("422 becomes a non-blocking notice", async () => {
    const { client, session } = makeSession();
    const done = session.commitLine("# comment only");
    client.pending[0].reject(new ApiError(422, "nothing to suggest"));
    await done;
    const state = session.getState();
    expect(state.status).toBe("notice");
    expect(state.notice).toMatch(/nothing to suggest/);
    expect(state.suggestions).toEqual([]);
  });

  it("network failure flips to offline but keeps the buffer", async () => {
    const { client, session } = makeSession();
    session.setBuffer("keep me\n");
    const done = session.commitLine("keep me");
    client.pending[0].reject(new TypeError("fetch failed"));
    await done;
    const state = session.getState();
    expect(state.status).toBe("offline");
    expect(state.buffer).toBe("keep me\n");
    expect(state.notice).toMatch(/unreachable/);
  });

  it("a stale error is discarded too", async () => {
    const { client, session } = makeSession();
    const first = session.commitLine("one()");
    const second = session.commitLine("two()");
    client.pending[1].resolve(response(["fine"]));
    await second;
    client.pending[0].reject(new TypeError("fetch failed"));
    await first;
    expect(session.getState().status).toBe("ready");
  });
});

describe("accepting suggestions", () => {
  async function primed() {
    const parts = makeSession();
    const done = parts.session.commitLine("start()");
    parts.client.pending[0].resolve(response(["next_a()", "next_b()"]));
    await done;
    return parts;
  }

  it("appends the chosen line and fires the next request", async () => {
    const { client, session } = await primed();
    session.setBuffer("start()\n");
    void session.acceptSuggestion(1);
    expect(session.getState().buffer).toBe("start()\nnext_a()\n");
    expect(client.pending.length).toBe(2);
    expect(client.pending[1].line).toBe("next_a()");
    expect(session.getState().status).toBe("loading");
  });

  it("accept inserts a newline when the buffer lacks one", async () => {
    const { session } = await primed();
    session.setBuffer("start()");
    void session.acceptSuggestion(2);
    expect(session.getState().buffer).toBe("start()\nnext_b()\n");
  });

  it("unknown rank is a no-op", async () => {
    const { client, session } = await primed();
    void session.acceptSuggestion(7);
    expect(client.pending.length).toBe(1);
  });

  it("undo restores the buffer and cancels the in-flight round", async () => {
    const { client, session } = await primed();
    session.setBuffer("start()\n");
    void session.acceptSuggestion(1);
    expect(session.canUndo()).toBe(true);
    session.undo();
    const state = session.getState();
    expect(state.buffer).toBe("start()\n");
    expect(state.suggestions).toEqual([]);
    expect(session.canUndo()).toBe(false);
    // the superseded reply must not resurface after undo
    client.pending[1].resolve(response(["zombie()"]));
    await tick();
    expect(session.getState().suggestions).toEqual([]);
  });
});
