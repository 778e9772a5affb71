/** DOM wiring: textarea editor on the left, live suggestion list on the right. */

import { SuggestClient } from "./api.js";
import { PlaygroundSession, SessionState } from "./session.js";

const K = 10;
const HEALTH_POLL_MS = 10_000;

function currentLineAt(text: string, caret: number): string {
  const start = text.lastIndexOf("\n", caret - 1) + 1;
  return text.slice(start, caret);
}

export function setupPlayground(root: Document): PlaygroundSession {
  const editor = root.getElementById("editor") as HTMLTextAreaElement;
  const list = root.getElementById("suggestions") as HTMLOListElement;
  const noticeBox = root.getElementById("notice") as HTMLElement;
  const oovBadge = root.getElementById("oov-badge") as HTMLElement;
  const statusDot = root.getElementById("health") as HTMLElement;
  const baseInput = root.getElementById("base-url") as HTMLInputElement;
  const undoButton = root.getElementById("undo") as HTMLButtonElement;
  const queryLabel = root.getElementById("query-line") as HTMLElement;

  const origin = root.defaultView?.location?.origin;
  const defaultBase = origin && origin.startsWith("http") ? origin : "http://127.0.0.1:8640";
  baseInput.value = defaultBase;
  const client = new SuggestClient(defaultBase);

  const render = (state: SessionState) => {
    if (editor.value !== state.buffer) {
      editor.value = state.buffer;
    }
    list.dataset.status = state.status;
    list.textContent = "";
    for (const suggestion of state.suggestions) {
      const item = root.createElement("li");
      item.dataset.rank = String(suggestion.rank);
      item.tabIndex = 0;
      const rank = root.createElement("span");
      rank.className = "rank";
      rank.textContent = String(suggestion.rank);
      const text = root.createElement("code");
      text.textContent = suggestion.line;
      const distance = root.createElement("span");
      distance.className = "distance";
      distance.textContent = suggestion.distance.toFixed(3);
      item.append(rank, text, distance);
      list.append(item);
    }
    oovBadge.hidden = !state.oov;
    noticeBox.textContent = state.notice ?? "";
    noticeBox.hidden = state.notice === null;
    queryLabel.textContent = state.committedLine
      ? `suggestions after: ${state.committedLine}`
      : "";
    undoButton.disabled = !session.canUndo();
    statusDot.dataset.state = state.status === "offline" ? "down" : "up";
  };

  const session = new PlaygroundSession(client, render, K);

  editor.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      const line = currentLineAt(editor.value, editor.selectionStart);
      // let the newline insert natively, then ask about the finished line
      setTimeout(() => {
        session.setBuffer(editor.value);
        void session.commitLine(line);
      }, 0);
    } else if (event.key === "z" && (event.ctrlKey || event.metaKey)) {
      event.preventDefault();
      session.undo();
    }
  });
  editor.addEventListener("input", () => session.setBuffer(editor.value));

  // digit 1-9 selects that rank, 0 selects rank 10; plain digits only when
  // the focus is on the list, Alt+digit from anywhere (typing stays intact)
  root.addEventListener("keydown", (event) => {
    if (!/^[0-9]$/.test(event.key)) return;
    const fromList = event.target instanceof Element
      && list.contains(event.target);
    if (!fromList && !event.altKey) return;
    event.preventDefault();
    const rank = event.key === "0" ? 10 : Number(event.key);
    void session.acceptSuggestion(rank);
  });

  list.addEventListener("click", (event) => {
    const item = (event.target as Element).closest("li");
    if (!item?.dataset.rank) return;
    void session.acceptSuggestion(Number(item.dataset.rank));
  });

  undoButton.addEventListener("click", () => session.undo());

  baseInput.addEventListener("change", () => {
    client.setBaseUrl(baseInput.value);
    void pollHealth();
  });

  const pollHealth = async () => {
    const alive = await client.health();
    statusDot.dataset.state = alive ? "up" : "down";
    if (alive) {
      session.markOnline();
    } else {
      session.markOffline();
    }
  };
  void pollHealth();
  const timer = root.defaultView?.setInterval(pollHealth, HEALTH_POLL_MS);
  root.defaultView?.addEventListener("unload", () => {
    if (timer !== undefined) root.defaultView?.clearInterval(timer);
  });

  return session;
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
  setupPlayground(document);
}
