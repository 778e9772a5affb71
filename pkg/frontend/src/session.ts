/**
 * Playground state machine.
 *
 * Owns the editor buffer, the current suggestion list, and the request
 * lifecycle. Every committed line bumps a sequence number; responses carry
 * the number they were issued under and are dropped when it no longer
 * matches, so a stale reply can never overwrite a newer one. Committing a
 * line that is already in flight is a no-op rather than a duplicate request.
 *
 * All suggestion content comes from the service verbatim; nothing is ranked
 * or filtered client-side.
 */

import { ApiError, SuggestClient, Suggestion } from "./api.js";

export type SessionStatus = "idle" | "loading" | "ready" | "notice" | "offline";

export interface SessionState {
  buffer: string;
  suggestions: Suggestion[];
  oov: boolean;
  status: SessionStatus;
  notice: string | null;
  committedLine: string | null;
}

export type StateListener = (state: SessionState) => void;

export class PlaygroundSession {
  private seq = 0;
  private pendingLine: string | null = null;
  private undoStack: string[] = [];
  private state: SessionState = {
    buffer: "",
    suggestions: [],
    oov: false,
    status: "idle",
    notice: null,
    committedLine: null,
  };

  constructor(
    private readonly client: SuggestClient,
    private readonly listener: StateListener,
    private readonly k = 10,
  ) {}

  getState(): SessionState {
    return this.state;
  }

  /** Sync the buffer from the editor without touching suggestions. */
  setBuffer(text: string): void {
    this.update({ buffer: text });
  }

  /** A line was completed in the editor; ask the service about it. */
  commitLine(line: string): Promise<void> {
    if (line.trim() === "") {
      this.update({ suggestions: [], oov: false, status: "idle", notice: null,
                    committedLine: null });
      return Promise.resolve();
    }
    if (this.state.status === "loading" && line === this.pendingLine) {
      return Promise.resolve(); // identical request already in flight
    }
    this.seq += 1;
    const issued = this.seq;
    this.pendingLine = line;
    this.update({ status: "loading", notice: null, committedLine: line });
    return this.client
      .suggest(line, this.k)
      .then((response) => {
        if (issued !== this.seq) return; // superseded; discard stale reply
        this.pendingLine = null;
        this.update({
          suggestions: response.suggestions,
          oov: response.oov,
          status: "ready",
          notice: null,
        });
      })
      .catch((error: unknown) => {
        if (issued !== this.seq) return;
        this.pendingLine = null;
        if (error instanceof ApiError && error.status === 422) {
          this.update({ suggestions: [], oov: false, status: "notice",
                        notice: "nothing to suggest from that line" });
        } else if (error instanceof ApiError) {
          this.update({ suggestions: [], oov: false, status: "notice",
                        notice: `service error: ${error.message}` });
        } else {
          this.update({ suggestions: [], oov: false, status: "offline",
                        notice: "service unreachable; the editor still works" });
        }
      });
  }

  /**
   * Insert the suggestion with the given rank as the next buffer line and
   * immediately ask for suggestions on it (the feedback loop).
   */
  acceptSuggestion(rank: number): Promise<void> {
    const chosen = this.state.suggestions.find((s) => s.rank === rank);
    if (!chosen) return Promise.resolve();
    this.undoStack.push(this.state.buffer);
    const base = this.state.buffer;
    const glue = base === "" || base.endsWith("\n") ? "" : "\n";
    this.update({ buffer: base + glue + chosen.line + "\n" });
    return this.commitLine(chosen.line);
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  /** Restore the buffer to the state before the last accepted suggestion. */
  undo(): void {
    const previous = this.undoStack.pop();
    if (previous === undefined) return;
    this.seq += 1; // invalidate any in-flight request
    this.pendingLine = null;
    this.update({ buffer: previous, suggestions: [], oov: false,
                  status: "idle", notice: null, committedLine: null });
  }

  markOffline(): void {
    this.update({ status: "offline",
                  notice: "service unreachable; the editor still works" });
  }

  markOnline(): void {
    if (this.state.status === "offline") {
      this.update({ status: "idle", notice: null });
    }
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    this.listener(this.state);
  }
}
