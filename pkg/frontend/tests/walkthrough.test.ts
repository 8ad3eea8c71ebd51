import { describe, expect, it } from "vitest";

import { SessionApi, type SessionSnapshot } from "../src/api.js";
import { renderCreateForm } from "../src/createForm.js";
import { SessionPage } from "../src/sessionPage.js";
import { API_BASE, click, mount, setField, submit, text, until } from "./helpers.js";

const api = new SessionApi(API_BASE);

/** The published notch-grid friction run: four explosions stepping down
 * from 360 N, the first negative at 80 N, then termination by six
 * straight negatives at 60 N. */
const NOTCH_RUN_OUTCOMES: Array<0 | 1> = [1, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0];
const NOTCH_RUN_LOADS = [360, 240, 160, 120, 80, 80, 60, 60, 60, 60, 60, 60];

describe("full session walk-through", () => {
  it("replays the notch-grid run to its 80 N termination banner", async () => {
    // create through the form, exactly as an operator would
    const home = mount();
    let created: SessionSnapshot | null = null;
    const form = renderCreateForm(home, {
      api,
      onCreated: (snapshot) => {
        created = snapshot;
      },
    });
    setField(home, "kind", "un-staircase");
    setField(home, "preset", "f1");
    setField(home, "grid", "notch-6");
    setField(home, "material", "PETN");
    submit(form);
    const snapshot = await until(() => created, "session creation");

    const container = mount();
    const page = new SessionPage(container, api, snapshot);

    // first recommendation is the grid maximum with its weight/notch
    expect(text(container, "recommendation")).toContain("360 N");
    expect(text(container, "recommendation")).toContain("B9, notch 6");
    expect(text(container, "status")).toBe("active");

    for (let i = 0; i < NOTCH_RUN_OUTCOMES.length; i++) {
      expect(page.snapshot.next?.stimulus).toBe(NOTCH_RUN_LOADS[i]);
      click(container, NOTCH_RUN_OUTCOMES[i] === 1 ? "btn-explosion" : "btn-no-explosion");
      await page.idle();
    }

    const banner = text(container, "termination-banner");
    expect(banner).toContain("80 N");
    expect(banner).toContain("type I");
    expect(text(container, "status")).toBe("terminated");

    // rendered history equals server history
    const rows = container.querySelectorAll('[data-testid="history"] tr');
    expect(rows).toHaveLength(1 + 12);
    expect(page.snapshot.history.map((t) => t.stimulus)).toEqual(NOTCH_RUN_LOADS);

    // buttons are dead after termination
    const button = container.querySelector<HTMLButtonElement>(
      '[data-testid="btn-explosion"]',
    );
    expect(button?.disabled).toBe(true);
  });

  it("shows the consecutive-negative count while a staircase runs", async () => {
    const snapshot = await api.createSession(
      { kind: "un-staircase", preset: "f1", grid: "notch-6" },
      "PETN",
    );
    const container = mount();
    const page = new SessionPage(container, api, snapshot);
    expect(text(container, "negative-run")).toBe(
      "consecutive negatives at this level: 0 of 6",
    );

    // 360 N: no explosion -> the run is on; another negative keeps counting
    click(container, "btn-no-explosion");
    await page.idle();
    expect(text(container, "negative-run")).toBe(
      "consecutive negatives at this level: 1 of 6",
    );
    click(container, "btn-no-explosion");
    await page.idle();
    expect(text(container, "negative-run")).toBe(
      "consecutive negatives at this level: 2 of 6",
    );

    // an explosion resets the count at the new, lower level
    click(container, "btn-explosion");
    await page.idle();
    expect(text(container, "negative-run")).toBe(
      "consecutive negatives at this level: 0 of 6",
    );
    expect(text(container, "provisional")).toContain("type I: 360 N");
  });

  it("renders the same view from the same snapshot after a reload", async () => {
    const created = await api.createSession(
      { kind: "un-staircase", preset: "f1", grid: "notch-6" },
      "PETN",
    );
    const first = mount();
    const page = new SessionPage(first, api, created);
    click(first, "btn-explosion");
    await page.idle();

    const second = mount();
    await SessionPage.load(second, api, created.id);
    expect(second.innerHTML).toBe(first.innerHTML);
  });
});
