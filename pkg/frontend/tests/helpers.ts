import type { FetchLike } from "../src/api.js";
import { API_BASE } from "./service-url.js";

export { API_BASE };

export interface RecordedCall {
  url: string;
  method: string;
}

/** Real fetch with a call log, for asserting how many requests the UI
 * actually sent. */
export function recordingFetch(): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = (input, init) => {
    calls.push({ url: input, method: init?.method ?? "GET" });
    return fetch(input, init);
  };
  return { fetchFn, calls };
}

/** A fetch that fails the test if anything is requested at all. */
export function forbiddenFetch(): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = (input, init) => {
    calls.push({ url: input, method: init?.method ?? "GET" });
    return Promise.reject(new Error(`unexpected request to ${input}`));
  };
  return { fetchFn, calls };
}

export function mount(): HTMLElement {
  const container = document.createElement("div");
  document.body.append(container);
  return container;
}

export function setField(scope: HTMLElement, name: string, value: string): void {
  const field = scope.querySelector<HTMLInputElement | HTMLSelectElement>(
    `[name="${name}"]`,
  );
  if (!field) throw new Error(`no form field named ${name}`);
  field.value = value;
  field.dispatchEvent(new Event("change", { bubbles: true }));
}

export function submit(form: HTMLFormElement): void {
  form.dispatchEvent(new Event("submit", { cancelable: true, bubbles: true }));
}

export function text(scope: HTMLElement, testid: string): string {
  const node = scope.querySelector(`[data-testid="${testid}"]`);
  return node?.textContent ?? "";
}

export function click(scope: HTMLElement, testid: string): void {
  const node = scope.querySelector<HTMLButtonElement>(
    `[data-testid="${testid}"]`,
  );
  if (!node) throw new Error(`nothing to click: ${testid}`);
  node.click();
}

export async function until<T>(
  probe: () => T | null | undefined | false,
  what = "condition",
  timeoutMs = 10_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = probe();
    if (value) return value;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error(`timed out waiting for ${what}`);
}
