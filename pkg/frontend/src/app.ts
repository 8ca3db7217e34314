// Single-page review flow: fetch next triple, capture a label (keys
// 1/2/3, Enter submits), submit without optimistic updates, and render
// the live human-vs-judge report when the session completes.

import { ApiClient, Card, Label, LABELS, Report } from "./api.js";
import { formatPercent, LABEL_DISPLAY } from "./format.js";

type Phase = "loading" | "card" | "done";

interface State {
  phase: Phase;
  card: Card | null;
  selected: Label | null;
  justification: string;
  banner: string | null;
  validation: string | null;
  submitting: boolean;
  report: Report | null;
  judgeReport: Report | null;
  retry: (() => void) | null;
}

const KEY_TO_LABEL: Record<string, Label> = {
  "1": "correct",
  "2": "incorrect",
  "3": "partially_correct",
};

export class AnnotationApp {
  private state: State = {
    phase: "loading",
    card: null,
    selected: null,
    justification: "",
    banner: null,
    validation: null,
    submitting: false,
    report: null,
    judgeReport: null,
    retry: null,
  };
  private pending: Promise<void> = Promise.resolve();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private sessionId: string,
    private runId: string | null = null,
  ) {}

  start(): Promise<void> {
    document.addEventListener("keydown", this.onKeydown);
    return this.track(this.loadNext());
  }

  /** Detach global listeners; after this the instance is inert. */
  dispose(): void {
    document.removeEventListener("keydown", this.onKeydown);
  }

  /** Settles when all in-flight work has finished; used by tests. */
  idle(): Promise<void> {
    return this.pending;
  }

  private track(work: Promise<void>): Promise<void> {
    this.pending = this.pending.then(() => work).catch(() => undefined);
    return this.pending;
  }

  private onKeydown = (event: KeyboardEvent): void => {
    if (this.state.phase !== "card" || this.state.submitting) {
      return;
    }
    const inTextarea = event.target instanceof HTMLTextAreaElement;
    if (!inTextarea && KEY_TO_LABEL[event.key]) {
      this.state.selected = KEY_TO_LABEL[event.key];
      this.state.validation = null;
      this.render();
      return;
    }
    if (event.key === "Enter" && !(inTextarea && event.shiftKey)) {
      event.preventDefault();
      this.track(this.submit());
    }
  };

  private async loadNext(): Promise<void> {
    try {
      const result = await this.api.next(this.sessionId);
      if (result.done) {
        await this.loadReports();
        return;
      }
      this.state.phase = "card";
      this.state.card = result.card;
      this.state.selected = null;
      this.state.justification = "";
      this.state.validation = null;
      this.state.submitting = false;
      this.state.retry = null;
    } catch {
      this.state.banner = "Could not reach the annotation service.";
      this.state.retry = () => this.track(this.loadNext());
    }
    this.render();
  }

  private async loadReports(): Promise<void> {
    this.state.report = await this.api.report(this.sessionId);
    this.state.judgeReport = this.runId ? await this.api.judgeReport(this.runId) : null;
    this.state.phase = "done";
    this.state.card = null;
    this.render();
  }

  private async submit(): Promise<void> {
    const { card, selected } = this.state;
    if (!card || !selected) {
      this.state.validation = "Choose a label first (1, 2 or 3).";
      this.render();
      return;
    }
    const justification = this.state.justification.trim();
    if (selected !== "correct" && !justification) {
      this.state.validation = "A short justification is required for this label.";
      this.render();
      return;
    }
    this.state.submitting = true;
    this.state.validation = null;
    this.render();
    try {
      const outcome = await this.api.submitVerdict(this.sessionId, card.triple_key, selected, justification);
      this.state.banner = outcome === "duplicate" ? "Already labeled; moving on." : null;
      await this.loadNext();
    } catch {
      this.state.submitting = false;
      this.state.banner = "Submission failed; the verdict was not saved.";
      this.state.retry = () => this.track(this.submit());
      this.render();
    }
  }

  private setJustification = (event: Event): void => {
    this.state.justification = (event.target as HTMLTextAreaElement).value;
  };

  render(): void {
    const { state } = this;
    this.root.replaceChildren();
    if (state.banner || state.retry) {
      const banner = el("div", "banner", state.banner ?? "");
      if (state.retry) {
        const button = el("button", "retry", "Retry");
        button.addEventListener("click", () => state.retry && state.retry());
        banner.appendChild(button);
      }
      this.root.appendChild(banner);
    }
    if (state.phase === "loading") {
      this.root.appendChild(el("p", "status", "Loading…"));
      return;
    }
    if (state.phase === "card" && state.card) {
      this.root.appendChild(this.renderCard(state.card));
      return;
    }
    if (state.phase === "done") {
      this.root.appendChild(this.renderReport());
    }
  }

  private renderCard(card: Card): HTMLElement {
    const box = el("section", "card");
    const progress = el(
      "p",
      "progress",
      `Triple ${card.progress.completed + 1} of ${card.progress.total}`,
    );
    box.appendChild(progress);

    const triple = el("div", "triple");
    triple.appendChild(el("span", "subject", card.triple_key.subject));
    triple.appendChild(el("span", "relation", card.triple_key.relation));
    triple.appendChild(el("span", "object", card.triple_key.object));
    box.appendChild(triple);

    box.appendChild(el("blockquote", "excerpt", card.excerpt || "(no excerpt found; open the full leaflet)"));

    const labels = el("div", "labels");
    LABELS.forEach((label, index) => {
      const button = el("button", "label" + (this.state.selected === label ? " selected" : ""));
      button.textContent = `${index + 1} · ${LABEL_DISPLAY[label]}`;
      button.dataset.label = label;
      button.addEventListener("click", () => {
        this.state.selected = label;
        this.state.validation = null;
        this.render();
      });
      labels.appendChild(button);
    });
    box.appendChild(labels);

    const justification = document.createElement("textarea");
    justification.className = "justification";
    justification.placeholder = "Justification (required for incorrect / partially correct)";
    justification.value = this.state.justification;
    justification.addEventListener("input", this.setJustification);
    box.appendChild(justification);

    if (this.state.validation) {
      box.appendChild(el("p", "validation", this.state.validation));
    }

    const submit = el("button", "submit", this.state.submitting ? "Saving…" : "Submit (Enter)");
    (submit as HTMLButtonElement).disabled = this.state.submitting || !this.state.selected;
    submit.addEventListener("click", () => this.track(this.submit()));
    box.appendChild(submit);
    return box;
  }

  private renderReport(): HTMLElement {
    const box = el("section", "report");
    box.appendChild(el("h2", "", "Session complete"));
    const human = this.state.report;
    if (!human) {
      box.appendChild(el("p", "status", "No report available."));
      return box;
    }
    const judge = this.state.judgeReport;
    const table = document.createElement("table");
    table.className = "report-table";
    const head = document.createElement("tr");
    ["Category", "Human count", "%"].forEach((text) => head.appendChild(el("th", "", text)));
    if (judge) {
      ["LLM count", "%"].forEach((text) => head.appendChild(el("th", "", text)));
    }
    table.appendChild(head);
    for (const label of Object.keys(LABEL_DISPLAY)) {
      const row = document.createElement("tr");
      row.dataset.label = label;
      row.appendChild(el("td", "", LABEL_DISPLAY[label]));
      row.appendChild(el("td", "count", String(human.counts[label] ?? 0)));
      row.appendChild(el("td", "percent", formatPercent(human.percentages[label] ?? 0)));
      if (judge) {
        row.appendChild(el("td", "count", String(judge.counts[label] ?? 0)));
        row.appendChild(el("td", "percent", formatPercent(judge.percentages[label] ?? 0)));
      }
      table.appendChild(row);
    }
    const total = document.createElement("tr");
    total.className = "total";
    total.appendChild(el("td", "", "Total"));
    total.appendChild(el("td", "count", String(human.total)));
    total.appendChild(el("td", "percent", human.total ? "100.0" : "0.0"));
    if (judge) {
      total.appendChild(el("td", "count", String(judge.total)));
      total.appendChild(el("td", "percent", judge.total ? "100.0" : "0.0"));
    }
    table.appendChild(total);
    box.appendChild(table);
    return box;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}
