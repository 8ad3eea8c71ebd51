import type { SessionApi, SessionSnapshot } from "./api.js";
import { ApiError } from "./api.js";
import { el } from "./dom.js";
import { describeEstimate, formatLabel, formatStimulus } from "./format.js";

/** Live session screen.  The snapshot returned by the server is the
 * only state of record; every render is a pure function of it.  While a
 * POST is in flight the outcome buttons are disabled, so a double
 * click can never commit twice (the echo guard would reject the copy
 * anyway). */
export class SessionPage {
  snapshot: SessionSnapshot;
  private busy = false;
  private lastError = "";
  private waiters: Array<() => void> = [];

  constructor(
    private readonly container: HTMLElement,
    private readonly api: SessionApi,
    snapshot: SessionSnapshot,
  ) {
    this.snapshot = snapshot;
    this.render();
  }

  static async load(
    container: HTMLElement,
    api: SessionApi,
    id: string,
  ): Promise<SessionPage> {
    return new SessionPage(container, api, await api.getSession(id));
  }

  /** Resolves once no outcome request is in flight. */
  idle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  async record(outcome: 0 | 1): Promise<void> {
    if (this.busy || this.snapshot.status !== "active") return;
    this.busy = true;
    this.setButtonsDisabled(true);
    try {
      this.snapshot = await this.api.postOutcome(
        this.snapshot.id,
        outcome,
        this.snapshot.trials,
      );
      this.lastError = "";
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // stale echo or already terminated: the server is the truth —
        // refresh the view rather than surfacing a failure
        this.snapshot = await this.api.getSession(this.snapshot.id);
        this.lastError = "";
      } else {
        this.lastError = "request failed — check the connection and retry";
      }
    } finally {
      this.busy = false;
      this.render();
      const waiters = this.waiters;
      this.waiters = [];
      for (const resolve of waiters) resolve();
    }
  }

  private setButtonsDisabled(disabled: boolean): void {
    for (const button of this.container.querySelectorAll<HTMLButtonElement>(
      "button[data-outcome]",
    )) {
      button.disabled = disabled;
    }
  }

  private negativeRun(): { run: number; k: number } | null {
    const snapshot = this.snapshot;
    if (snapshot.kind !== "un-staircase" || snapshot.next === null) return null;
    const k = snapshot.design.k_negatives;
    if (typeof k !== "number") return null;
    let run = 0;
    for (let i = snapshot.history.length - 1; i >= 0; i--) {
      const trial = snapshot.history[i];
      if (trial && trial.outcome === 0 && trial.stimulus === snapshot.next.stimulus) {
        run++;
      } else {
        break;
      }
    }
    return { run, k };
  }

  private renderBanner(): HTMLElement | null {
    const { snapshot } = this;
    if (snapshot.status !== "terminated") return null;
    let text: string;
    if (snapshot.result) {
      text =
        snapshot.result.value === null
          ? "Terminated — no response at any tested level (grid floor reached)"
          : `Terminated — limiting load ${formatStimulus(snapshot.result.value, snapshot.unit)} (type ${snapshot.result.limiting_type})`;
    } else {
      text = `Terminated after ${snapshot.trials} trials`;
    }
    return el("div", { class: "banner", "data-testid": "termination-banner" }, text);
  }

  private renderRecommendation(): HTMLElement | null {
    const next = this.snapshot.next;
    if (next === null) return null;
    const label = formatLabel(next.label);
    const card = el(
      "div",
      { class: "card", "data-testid": "recommendation" },
      el("span", { class: "big" }, formatStimulus(next.stimulus, this.snapshot.unit)),
      label === null ? "" : el("span", { class: "notch" }, ` — ${label}`),
      el("span", { class: "seq" }, ` (trial ${next.seq + 1})`),
    );
    return card;
  }

  private renderEstimate(): HTMLElement | null {
    const estimate = this.snapshot.estimate;
    if (estimate === null) return null;
    const block = el(
      "div",
      { class: "estimate", "data-testid": "estimate" },
      el(
        "div",
        {},
        `running estimate for the ${estimate.p} quantile: ` +
          describeEstimate(estimate, this.snapshot.unit),
      ),
    );
    const { point, lo, hi } = estimate;
    if (point !== null && lo !== null && hi !== null && hi > lo) {
      const left = lo - 0.08 * (hi - lo);
      const right = hi + 0.08 * (hi - lo);
      const x = (value: number): number =>
        Math.round(((value - left) / (right - left)) * 240);
      const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
      svg.setAttribute("viewBox", "0 0 240 24");
      svg.setAttribute("class", "ci-bar");
      svg.innerHTML =
        `<line x1="${x(lo)}" y1="12" x2="${x(hi)}" y2="12" stroke="#888" stroke-width="2"/>` +
        `<line x1="${x(lo)}" y1="6" x2="${x(lo)}" y2="18" stroke="#888" stroke-width="2"/>` +
        `<line x1="${x(hi)}" y1="6" x2="${x(hi)}" y2="18" stroke="#888" stroke-width="2"/>` +
        `<circle cx="${x(point)}" cy="12" r="4" fill="#1a6"/>`;
      block.append(svg);
    }
    return block;
  }

  private renderProvisional(): HTMLElement | null {
    const provisional = this.snapshot.provisional;
    if (!provisional) return null;
    const show = (value: number | null): string =>
      value === null ? "—" : formatStimulus(value, this.snapshot.unit);
    return el(
      "div",
      { "data-testid": "provisional" },
      `provisional limiting stimulus — type I: ${show(provisional.type_i)}, ` +
        `type II: ${show(provisional.type_ii)}`,
    );
  }

  private renderHistory(): HTMLElement {
    const table = el("table", { "data-testid": "history" });
    table.append(
      el(
        "tr",
        {},
        el("th", {}, "#"),
        el("th", {}, "load"),
        el("th", {}, "setting"),
        el("th", {}, "outcome"),
        el("th", {}, "note"),
      ),
    );
    for (const trial of this.snapshot.history) {
      table.append(
        el(
          "tr",
          {},
          el("td", {}, String(trial.index)),
          el(
            "td",
            {},
            formatStimulus(trial.stimulus, this.snapshot.unit) +
              (trial.override ? " *" : ""),
          ),
          el("td", {}, formatLabel(trial.label) ?? ""),
          el("td", {}, trial.outcome === 1 ? "explosion" : "no explosion"),
          el("td", {}, trial.note ?? ""),
        ),
      );
    }
    return table;
  }

  render(): void {
    const { snapshot } = this;
    const active = snapshot.status === "active" && !this.busy;
    const negatives = this.negativeRun();
    const pieces: Array<HTMLElement | null> = [
      el(
        "h2",
        {},
        snapshot.material === "" ? "session" : snapshot.material,
        el("span", { class: "kind" }, ` · ${snapshot.kind} · `),
        el("span", { "data-testid": "status" }, snapshot.status),
      ),
      this.renderBanner(),
      this.renderRecommendation(),
      negatives === null
        ? null
        : el(
            "div",
            { "data-testid": "negative-run" },
            `consecutive negatives at this level: ${negatives.run} of ${negatives.k}`,
          ),
      el(
        "div",
        { class: "buttons" },
        el(
          "button",
          {
            "data-outcome": "1",
            "data-testid": "btn-explosion",
            disabled: !active,
            onclick: () => void this.record(1),
          },
          "Explosion",
        ),
        el(
          "button",
          {
            "data-outcome": "0",
            "data-testid": "btn-no-explosion",
            disabled: !active,
            onclick: () => void this.record(0),
          },
          "No explosion",
        ),
      ),
      this.lastError === ""
        ? null
        : el("div", { class: "error", "data-testid": "page-error" }, this.lastError),
      this.renderEstimate(),
      this.renderProvisional(),
      this.renderHistory(),
    ];
    this.container.replaceChildren(...pieces.filter((p): p is HTMLElement => p !== null));
  }
}
