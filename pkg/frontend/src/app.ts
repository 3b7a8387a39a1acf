/**
 * Application wiring: chat session on the left, explorer panels on the
 * right. Explorer navigation (graph, search) is stateless: the panel kind
 * and its inputs live in the query string, so any view can be reloaded or
 * shared by URL. Snippet views render server-provided evidence from the
 * current answer in place.
 */

import { ApiClient, ApiError } from "./api";
import type { EvidenceItem, FetchLike, SessionTurn } from "./api";
import {
  answerCard,
  el,
  errorCard,
  neighborhoodPanel,
  panelError,
  pendingBubble,
  searchPanel,
  snippetPanel,
  userBubble,
} from "./views";

export interface AppOptions {
  fetchFn?: FetchLike;
  win?: Window;
}

export interface App {
  /** Resolves once health, session bootstrap, and URL restore settled. */
  ready: Promise<void>;
  root: HTMLElement;
}

const DIRECTIONS = ["both", "out", "in"];

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export function initApp(root: HTMLElement, opts: AppOptions = {}): App {
  const win = opts.win ?? window;
  const api = new ApiClient(opts.fetchFn ?? ((input, init) => win.fetch(input, init)));

  // --- skeleton -------------------------------------------------------------

  root.replaceChildren();
  const topbar = el("header", "topbar");
  const title = el("h1", "app-title", "klipa");
  const statusDot = el("span", "status-dot");
  title.prepend(statusDot);
  topbar.appendChild(title);
  const modelEl = el("span", "model-name", "");
  topbar.appendChild(modelEl);
  root.appendChild(topbar);

  const layout = el("main", "layout");

  const chatPanel = el("section", "chat-panel");
  const transcript = el("div", "transcript");
  chatPanel.appendChild(transcript);
  const chatForm = el("form", "chat-form");
  const chatInput = el("input", "chat-input");
  chatInput.type = "text";
  chatInput.placeholder = "Ask about the corpus...";
  const sendBtn = el("button", "send-btn", "Send");
  sendBtn.type = "submit";
  chatForm.appendChild(chatInput);
  chatForm.appendChild(sendBtn);
  chatPanel.appendChild(chatForm);
  layout.appendChild(chatPanel);

  const explorer = el("section", "explorer-panel");
  const searchForm = el("form", "search-form");
  const searchInput = el("input", "search-input");
  searchInput.type = "text";
  searchInput.placeholder = "Search the corpus...";
  const levelSelect = el("select", "level-select");
  for (const level of ["chunk", "document"]) {
    const option = el("option", undefined, level);
    option.value = level;
    levelSelect.appendChild(option);
  }
  const searchBtn = el("button", "search-btn", "Search");
  searchBtn.type = "submit";
  searchForm.appendChild(searchInput);
  searchForm.appendChild(levelSelect);
  searchForm.appendChild(searchBtn);
  explorer.appendChild(searchForm);
  const explorerBody = el("div", "explorer-body");
  explorer.appendChild(explorerBody);
  layout.appendChild(explorer);

  root.appendChild(layout);

  // --- state ----------------------------------------------------------------

  let sessionId: string | null = null;
  let pending = false;

  function mountPanel(panel: HTMLElement): void {
    explorerBody.replaceChildren(panel);
  }

  mountPanel(el("div", "panel panel-hint", "Click evidence or search to explore."));

  // --- explorer panels (deep-linkable) ---------------------------------------

  function pushPanelState(params: Record<string, string>): void {
    win.history.pushState(null, "", `?${new URLSearchParams(params)}`);
  }

  async function openGraph(entity: string, direction: string, push: boolean): Promise<void> {
    if (push) pushPanelState({ panel: "graph", entity, direction });
    mountPanel(el("div", "panel panel-loading", "loading..."));
    try {
      const body = await api.neighborhood(entity, direction);
      const panel = neighborhoodPanel(body, (key) => void openGraph(key, direction, true));
      const picker = el("select", "direction-select");
      for (const d of DIRECTIONS) {
        const option = el("option", undefined, d);
        option.value = d;
        option.selected = d === direction;
        picker.appendChild(option);
      }
      picker.addEventListener("change", () => void openGraph(entity, picker.value, true));
      panel.querySelector(".panel-head")?.appendChild(picker);
      mountPanel(panel);
    } catch (err) {
      if (err instanceof ApiError && err.code === "entity_not_found") {
        mountPanel(panelError(`not in graph: ${err.message}`, []));
      } else {
        mountPanel(
          panelError(messageOf(err), [
            { label: "retry", handler: () => void openGraph(entity, direction, false) },
          ]),
        );
      }
    }
  }

  async function openSearch(q: string, level: string, push: boolean): Promise<void> {
    if (push) pushPanelState({ panel: "search", q, level });
    mountPanel(el("div", "panel panel-loading", "loading..."));
    try {
      mountPanel(searchPanel(q, await api.search(q, level)));
    } catch (err) {
      mountPanel(
        panelError(messageOf(err), [
          { label: "retry", handler: () => void openSearch(q, level, false) },
        ]),
      );
    }
  }

  function restoreFromLocation(): Promise<void> {
    const params = new URLSearchParams(win.location.search);
    const panel = params.get("panel");
    const entity = params.get("entity");
    const q = params.get("q");
    if (panel === "graph" && entity) {
      return openGraph(entity, params.get("direction") ?? "both", false);
    }
    if (panel === "search" && q) {
      return openSearch(q, params.get("level") ?? "chunk", false);
    }
    return Promise.resolve();
  }

  win.addEventListener("popstate", () => void restoreFromLocation());

  // --- chat -----------------------------------------------------------------

  function onEvidence(item: EvidenceItem): void {
    if (item.kind === "entity") {
      void openGraph(item.ref.slice(item.ref.indexOf(":") + 1), "both", true);
    } else {
      mountPanel(snippetPanel(item));
    }
  }

  function renderTranscript(turns: SessionTurn[]): void {
    transcript.replaceChildren();
    for (const turn of turns) {
      transcript.appendChild(userBubble(turn.user_text));
      transcript.appendChild(answerCard(turn.answer, onEvidence));
    }
    transcript.scrollTop = transcript.scrollHeight;
  }

  function renderChatError(err: unknown, text: string): void {
    let card: HTMLElement;
    const actions = [
      {
        label: "retry",
        handler: () => {
          card.remove();
          void submitMessage(text);
        },
      },
    ];
    if (err instanceof ApiError && err.code === "session_not_found") {
      actions.push({
        label: "new session",
        handler: () => {
          card.remove();
          sessionId = null;
          void submitMessage(text);
        },
      });
    }
    card = errorCard(messageOf(err), actions);
    transcript.appendChild(card);
  }

  async function submitMessage(text: string): Promise<void> {
    if (pending) return;
    pending = true;
    sendBtn.disabled = true;
    chatInput.disabled = true;
    transcript.appendChild(userBubble(text));
    const spinner = pendingBubble();
    transcript.appendChild(spinner);
    try {
      if (sessionId === null) {
        sessionId = (await api.createSession()).session_id;
      }
      await api.sendMessage(sessionId, text);
      // re-read the transcript so the view always mirrors the server
      renderTranscript((await api.getSession(sessionId)).turns);
    } catch (err) {
      spinner.remove();
      renderChatError(err, text);
    } finally {
      pending = false;
      sendBtn.disabled = false;
      chatInput.disabled = false;
    }
  }

  chatForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const text = chatInput.value.trim();
    if (!text || pending) return;
    chatInput.value = "";
    void submitMessage(text);
  });

  searchForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const q = searchInput.value.trim();
    if (q) void openSearch(q, levelSelect.value, true);
  });

  // --- boot -----------------------------------------------------------------

  const ready = (async () => {
    const health = api.health().then(
      (body) => {
        statusDot.classList.add("ok");
        modelEl.textContent = body.model;
      },
      () => {
        statusDot.classList.add("error");
        modelEl.textContent = "offline";
      },
    );
    const session = api.createSession().then(
      (body) => {
        sessionId = body.session_id;
      },
      () => {
        sessionId = null; // created lazily on first send
      },
    );
    await Promise.all([health, session, restoreFromLocation()]);
  })();

  return { ready, root };
}
