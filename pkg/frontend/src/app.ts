/** DOM wiring: render the leased paragraph, progress, and controls. */

import { ReviewApi } from "./api.js";
import { TaskView } from "./task.js";

const PROGRESS_POLL_MS = 3000;

export function mountApp(root: HTMLElement, api: ReviewApi, reviewerId: string): TaskView {
  root.innerHTML = `
    <header>
      <h1>Review queue</h1>
      <div id="progress" class="progress">loading…</div>
    </header>
    <main>
      <div id="status" class="status"></div>
      <div id="paragraph" class="paragraph"></div>
      <div class="controls">
        <button id="submit" disabled>Submit &amp; next</button>
        <button id="lease">Lease next</button>
        <span id="reviewer" class="reviewer"></span>
      </div>
    </main>
  `;
  const paragraphEl = root.querySelector<HTMLDivElement>("#paragraph")!;
  const statusEl = root.querySelector<HTMLDivElement>("#status")!;
  const progressEl = root.querySelector<HTMLDivElement>("#progress")!;
  const submitBtn = root.querySelector<HTMLButtonElement>("#submit")!;
  const leaseBtn = root.querySelector<HTMLButtonElement>("#lease")!;
  root.querySelector<HTMLSpanElement>("#reviewer")!.textContent = `reviewer: ${reviewerId}`;

  const view = new TaskView(api, reviewerId);

  function renderParagraph(): void {
    paragraphEl.replaceChildren();
    if (view.task === null) return;
    let cursor = 0;
    for (const token of view.task.tokens) {
      if (token.start > cursor) {
        paragraphEl.append(document.createTextNode(view.task.text.slice(cursor, token.start)));
      }
      const chip = document.createElement("span");
      chip.textContent = token.text;
      chip.className = view.highlighted.has(token.id) ? "token highlighted" : "token";
      chip.dataset.tokenId = String(token.id);
      chip.addEventListener("click", () => view.toggle(token.id));
      paragraphEl.append(chip);
      cursor = token.end;
    }
    if (cursor < view.task.text.length) {
      paragraphEl.append(document.createTextNode(view.task.text.slice(cursor)));
    }
  }

  function render(): void {
    renderParagraph();
    submitBtn.disabled = !view.canSubmit;
    leaseBtn.disabled = view.status === "submitting";
    switch (view.status) {
      case "drained":
        statusEl.textContent = "No pending tasks in the current round. Check back soon.";
        break;
      case "stale":
        statusEl.textContent = view.lastError ?? "Lease expired.";
        break;
      default:
        statusEl.textContent = view.lastError ?? (view.dirty ? "Edited (unsubmitted)" : "");
    }
  }

  async function refreshProgress(): Promise<void> {
    try {
      const p = await api.progress();
      progressEl.textContent =
        p.round === null
          ? "no active round"
          : `round ${p.round}: ${p.done}/${p.total} done, ${p.pending} pending`;
    } catch {
      progressEl.textContent = "service unreachable";
    }
  }

  view.onChange = render;
  submitBtn.addEventListener("click", () => void view.submit().then(refreshProgress));
  leaseBtn.addEventListener("click", () => void view.loadNext());

  void view.loadNext();
  void refreshProgress();
  setInterval(() => void refreshProgress(), PROGRESS_POLL_MS);
  return view;
}
