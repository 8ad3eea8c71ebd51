import type { SessionApi, SessionSnapshot } from "./api.js";
import { ApiError } from "./api.js";
import { el } from "./dom.js";

export interface CreateFormValues {
  kind: string;
  p: string;
  x1: string;
  d: string;
  n: string;
  grid: string;
  preset: string;
  start: string;
  material: string;
  unit: string;
}

export interface BuildResult {
  errors: Record<string, string>;
  design?: Record<string, unknown>;
}

const GRID_CHOICES = ["", "notch-6", "all-intermediate", "bam-default"];
const PRESET_CHOICES = ["i1", "i2", "i3", "f1", "f2"];

function numberField(
  raw: string,
  field: string,
  errors: Record<string, string>,
  check: (value: number) => string | null,
): number | null {
  const value = Number(raw);
  if (raw.trim() === "" || !Number.isFinite(value)) {
    errors[field] = "enter a number";
    return null;
  }
  const problem = check(value);
  if (problem !== null) {
    errors[field] = problem;
    return null;
  }
  return value;
}

const inUnitInterval = (value: number): string | null =>
  value > 0 && value < 1 ? null : "must be strictly between 0 and 1";
const positive = (value: number): string | null =>
  value > 0 ? null : "must be positive";
const positiveInteger = (value: number): string | null =>
  Number.isInteger(value) && value > 0 ? null : "must be a positive whole number";

/** Client-side validation; returns the design payload only when every
 * field checks out, so no request is ever sent for a bad form. */
export function buildDesign(values: CreateFormValues): BuildResult {
  const errors: Record<string, string> = {};
  const design: Record<string, unknown> = { kind: values.kind };

  switch (values.kind) {
    case "bcd": {
      design.p = numberField(values.p, "p", errors, inUnitInterval);
      design.x1 = numberField(values.x1, "x1", errors, positive);
      design.d = numberField(values.d, "d", errors, positive);
      if (values.grid) design.grid = values.grid;
      break;
    }
    case "up-down": {
      design.x1 = numberField(values.x1, "x1", errors, positive);
      design.d = numberField(values.d, "d", errors, positive);
      break;
    }
    case "rmj": {
      design.p = numberField(values.p, "p", errors, inUnitInterval);
      design.n = numberField(values.n, "n", errors, positiveInteger);
      design.x1 = numberField(values.x1, "x1", errors, positive);
      break;
    }
    case "un-staircase": {
      if (!PRESET_CHOICES.includes(values.preset)) {
        errors.preset = "choose a procedure preset";
      } else {
        design.preset = values.preset;
      }
      if (!values.grid) {
        errors.grid = "choose a grid";
      } else {
        design.grid = values.grid;
      }
      if (values.start.trim() !== "") {
        const asNumber = Number(values.start);
        design.start = Number.isFinite(asNumber) ? asNumber : values.start;
      }
      break;
    }
    default:
      errors.kind = "choose a design";
  }

  if (Object.keys(errors).length > 0) return { errors };
  return { errors, design };
}

export function readFormValues(form: HTMLFormElement): CreateFormValues {
  const get = (name: string): string => {
    const field = form.querySelector<HTMLInputElement | HTMLSelectElement>(
      `[name="${name}"]`,
    );
    return field ? field.value : "";
  };
  return {
    kind: get("kind"),
    p: get("p"),
    x1: get("x1"),
    d: get("d"),
    n: get("n"),
    grid: get("grid"),
    preset: get("preset"),
    start: get("start"),
    material: get("material"),
    unit: get("unit") || "N",
  };
}

interface CreateFormOptions {
  api: SessionApi;
  onCreated: (snapshot: SessionSnapshot) => void;
}

function labelled(text: string, field: HTMLElement, name: string): HTMLElement {
  return el(
    "div",
    { class: "field" },
    el("label", {}, text, field),
    el("span", { class: "error", "data-error-for": name }),
  );
}

function select(name: string, options: string[], value: string): HTMLSelectElement {
  const node = el("select", { name });
  for (const option of options) {
    node.append(el("option", { value: option }, option === "" ? "(none)" : option));
  }
  node.value = value;
  return node;
}

/** Mount the create-session form; calls `onCreated` with the server
 * snapshot after a successful POST. */
export function renderCreateForm(
  container: HTMLElement,
  options: CreateFormOptions,
): HTMLFormElement {
  const form = el("form", { "data-testid": "create-form" });
  form.append(
    labelled("design", select("kind", ["bcd", "up-down", "rmj", "un-staircase"], "bcd"), "kind"),
    labelled("target p", el("input", { name: "p", value: "0.1" }), "p"),
    labelled("initial load x1", el("input", { name: "x1", value: "80" }), "x1"),
    labelled("step d", el("input", { name: "d", value: "0.3" }), "d"),
    labelled("trials n", el("input", { name: "n", value: "30" }), "n"),
    labelled("grid", select("grid", GRID_CHOICES, ""), "grid"),
    labelled("procedure preset", select("preset", ["", ...PRESET_CHOICES], ""), "preset"),
    labelled("start level", el("input", { name: "start", value: "" }), "start"),
    labelled("material", el("input", { name: "material", value: "" }), "material"),
    labelled("unit", el("input", { name: "unit", value: "N" }), "unit"),
    el("button", { type: "submit" }, "start session"),
    el("div", { class: "error", "data-testid": "form-error" }),
  );

  const showErrors = (errors: Record<string, string>, general = "") => {
    for (const span of form.querySelectorAll<HTMLElement>("[data-error-for]")) {
      const name = span.getAttribute("data-error-for") ?? "";
      span.textContent = errors[name] ?? "";
    }
    const banner = form.querySelector<HTMLElement>('[data-testid="form-error"]');
    if (banner) banner.textContent = general;
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const values = readFormValues(form);
    const result = buildDesign(values);
    if (!result.design) {
      showErrors(result.errors);
      return;
    }
    showErrors({});
    void options.api
      .createSession(result.design, values.material, values.unit)
      .then((snapshot) => options.onCreated(snapshot))
      .catch((error: unknown) => {
        const message =
          error instanceof ApiError ? error.message : "request failed — retry";
        showErrors({}, message);
      });
  });

  container.append(form);
  return form;
}
