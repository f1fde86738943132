// DOM rendering for the chat window: bubbles, the assortment table, and the
// constraint chips. Pure render-from-state; all behavior lives in state.ts.

import { DatasetDoc, ResultDoc } from "./api.js";
import { ChatController, ChatViewState, Turn, canonicalPrompt, chipLabels } from "./state.js";

export interface ViewHandles {
  transcript: HTMLElement;
  chips: HTMLElement;
  input: HTMLTextAreaElement;
  send: HTMLButtonElement;
  newSession: HTMLButtonElement;
  datasets: HTMLSelectElement;
  banner: HTMLElement;
}

export function renderResultTable(result: ResultDoc): HTMLTableElement {
  const table = document.createElement("table");
  table.className = "result-table";
  const caption = table.createCaption();
  caption.textContent = `Expected revenue: ${result.revenue.toFixed(2)}`;
  const head = table.createTHead().insertRow();
  for (const label of ["product", "name", "price", "choice prob"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  const body = table.createTBody();
  const rows =
    result.products ??
    result.assortment.map((id) => ({
      id,
      name: "",
      price: NaN,
      choice_probability: result.probabilities[String(id)] ?? NaN,
    }));
  for (const row of rows) {
    const tr = body.insertRow();
    tr.insertCell().textContent = String(row.id);
    tr.insertCell().textContent = row.name;
    tr.insertCell().textContent = Number.isFinite(row.price) ? row.price.toFixed(2) : "";
    tr.insertCell().textContent = row.choice_probability.toFixed(4);
  }
  return table;
}

function renderTurn(turn: Turn, index: number, controller: ChatController): HTMLElement {
  const bubble = document.createElement("div");
  bubble.className = `bubble ${turn.role} ${turn.kind}`;
  const text = document.createElement("div");
  text.className = "bubble-text";
  text.textContent = turn.text;
  bubble.appendChild(text);

  if (turn.kind === "error" && turn.errorCode) {
    bubble.dataset.errorCode = turn.errorCode;
    const code = document.createElement("span");
    code.className = "error-code";
    code.textContent = turn.errorCode;
    bubble.prepend(code);
  }
  if (turn.kind === "result" && turn.result) {
    bubble.appendChild(renderResultTable(turn.result));
  }
  if (turn.kind === "retry") {
    const button = document.createElement("button");
    button.className = "retry";
    button.textContent = "Retry";
    button.addEventListener("click", () => void controller.retry(index));
    bubble.appendChild(button);
  }
  return bubble;
}

export function render(state: ChatViewState, handles: ViewHandles, controller: ChatController): void {
  handles.transcript.replaceChildren(...state.turns.map((t, i) => renderTurn(t, i, controller)));
  handles.transcript.scrollTop = handles.transcript.scrollHeight;

  handles.chips.replaceChildren(
    ...chipLabels(state.chips).map((label) => {
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.textContent = label;
      return chip;
    }),
  );

  handles.send.disabled = state.pending || !state.sessionId;
  handles.input.disabled = state.pending || !state.sessionId;
  handles.banner.textContent = state.banner ?? "";
  handles.banner.hidden = !state.banner;
}

export function wire(handles: ViewHandles, controller: ChatController): void {
  controller.subscribe((state) => render(state, handles, controller));

  const submit = () => {
    const text = handles.input.value;
    void controller.sendMessage(text).then((sent) => {
      if (sent) handles.input.value = "";
    });
  };
  handles.send.addEventListener("click", submit);
  handles.input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      submit();
    }
  });
  handles.newSession.addEventListener("click", () => void controller.newSession());
  handles.datasets.addEventListener("change", () => {
    const id = handles.datasets.value;
    if (id) handles.input.value = canonicalPrompt(id);
    handles.datasets.value = "";
    handles.input.focus();
  });
}

export function populateDatasetPicker(select: HTMLSelectElement, datasets: DatasetDoc[]): void {
  select.replaceChildren();
  const placeholder = document.createElement("option");
  placeholder.value = "";
  placeholder.textContent = "insert a dataset prompt...";
  select.appendChild(placeholder);
  for (const dataset of datasets) {
    const option = document.createElement("option");
    option.value = dataset.dataset_id;
    option.textContent = `${dataset.dataset_id} (${dataset.product_count} products)`;
    select.appendChild(option);
  }
}
