import { SessionApi } from "./api.js";
import { el } from "./dom.js";
import { renderCreateForm } from "./createForm.js";
import { SessionPage } from "./sessionPage.js";

/** API base: same origin by default, overridable with `?api=http://...`
 * so the static console can point at a service on another port. */
export function apiBaseFromLocation(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "";
}

export function createApp(root: HTMLElement, api: SessionApi): { route: () => Promise<void> } {
  async function renderHome(): Promise<void> {
    root.replaceChildren(el("h1", {}, "senskit bench console"));
    renderCreateForm(root, {
      api,
      onCreated: (snapshot) => {
        window.location.hash = `#/session/${snapshot.id}`;
      },
    });
    const listHeader = el("h2", {}, "sessions");
    const list = el("ul", { "data-testid": "session-list" });
    root.append(listHeader, list);
    try {
      for (const summary of await api.listSessions()) {
        list.append(
          el(
            "li",
            {},
            el(
              "a",
              { href: `#/session/${summary.id}` },
              `${summary.id} · ${summary.kind} · ${summary.material || "(no material)"} · ` +
                `${summary.trials} trials · ${summary.status}`,
            ),
          ),
        );
      }
    } catch {
      list.append(el("li", { class: "error" }, "could not reach the session service"));
    }
  }

  async function route(): Promise<void> {
    const match = /^#\/session\/(.+)$/.exec(window.location.hash);
    if (match && match[1]) {
      root.replaceChildren(el("p", {}, "loading session…"));
      try {
        const container = el("div", {});
        await SessionPage.load(container, api, decodeURIComponent(match[1]));
        root.replaceChildren(
          el("p", {}, el("a", { href: "#" }, "← all sessions")),
          container,
        );
      } catch {
        root.replaceChildren(
          el("p", { class: "error" }, "session not found"),
          el("p", {}, el("a", { href: "#" }, "← all sessions")),
        );
      }
    } else {
      await renderHome();
    }
  }

  window.addEventListener("hashchange", () => void route());
  return { route };
}
