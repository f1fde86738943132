// View-state machine for the chat window. Framework-free so the rules are
// testable without a DOM: one in-flight request per session, empty input
// never sent, chips always mirror the latest reply's frame, and a failed
// send leaves a retry affordance instead of a duplicated turn.

import { ApiClient, ApiError, FrameDoc, NetworkError, PlannerReplyDoc, ResultDoc } from "./api.js";

export type TurnKind = "message" | "result" | "error" | "retry";

export interface Turn {
  role: "user" | "assistant";
  kind: TurnKind;
  text: string;
  result?: ResultDoc;
  errorCode?: string;
  retryText?: string;
}

export interface ChatViewState {
  sessionId: string | null;
  turns: Turn[];
  pending: boolean;
  lastResult: ResultDoc | null;
  chips: FrameDoc | null;
  banner: string | null;
}

export function emptyState(): ChatViewState {
  return { sessionId: null, turns: [], pending: false, lastResult: null, chips: null, banner: null };
}

export type Listener = (state: ChatViewState) => void;

export class ChatController {
  private state: ChatViewState = emptyState();
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  snapshot(): ChatViewState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(patch: Partial<ChatViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** POST /v1/sessions and start from a clean transcript. */
  async newSession(): Promise<void> {
    try {
      const sessionId = await this.api.createSession();
      this.update({ ...emptyState(), sessionId });
    } catch (err) {
      this.update({ banner: `Service unreachable: ${String(err)}` });
    }
  }

  /**
   * Send one prompt. Returns false when the send was blocked client-side
   * (empty text, no session, or another request already in flight).
   */
  async sendMessage(text: string): Promise<boolean> {
    const trimmed = text.trim();
    if (!trimmed || this.state.pending || !this.state.sessionId) return false;

    this.update({
      pending: true,
      turns: [...this.state.turns, { role: "user", kind: "message", text: trimmed }],
    });
    try {
      const reply = await this.api.sendMessage(this.state.sessionId, trimmed);
      this.applyReply(reply);
    } catch (err) {
      if (err instanceof ApiError) {
        this.update({
          pending: false,
          turns: [
            ...this.state.turns,
            { role: "assistant", kind: "error", text: err.message, errorCode: err.code },
          ],
        });
      } else if (err instanceof NetworkError) {
        // keep the user turn, offer a retry; nothing is duplicated
        this.update({
          pending: false,
          turns: [
            ...this.state.turns,
            { role: "assistant", kind: "retry", text: "Network problem; the message was not processed.", retryText: trimmed },
          ],
        });
      } else {
        throw err;
      }
    }
    return true;
  }

  /** Re-send the text attached to a retry bubble (replacing that bubble). */
  async retry(turnIndex: number): Promise<void> {
    const turn = this.state.turns[turnIndex];
    if (!turn || turn.kind !== "retry" || !turn.retryText || this.state.pending || !this.state.sessionId) {
      return;
    }
    const text = turn.retryText;
    this.update({
      pending: true,
      turns: this.state.turns.filter((_, i) => i !== turnIndex),
    });
    try {
      const reply = await this.api.sendMessage(this.state.sessionId, text);
      this.applyReply(reply);
    } catch (err) {
      if (err instanceof ApiError) {
        this.update({
          pending: false,
          turns: [...this.state.turns, { role: "assistant", kind: "error", text: err.message, errorCode: err.code }],
        });
      } else {
        this.update({
          pending: false,
          turns: [...this.state.turns, { role: "assistant", kind: "retry", text: "Network problem; the message was not processed.", retryText: text }],
        });
      }
    }
  }

  private applyReply(reply: PlannerReplyDoc): void {
    const turn: Turn = reply.error
      ? { role: "assistant", kind: "error", text: reply.reply_text, errorCode: reply.error.code }
      : reply.result
        ? { role: "assistant", kind: "result", text: reply.reply_text, result: reply.result }
        : { role: "assistant", kind: "message", text: reply.reply_text };
    this.update({
      pending: false,
      turns: [...this.state.turns, turn],
      lastResult: reply.result ?? this.state.lastResult,
      // the server's frame is the single source of truth for the chips
      chips: reply.frame,
    });
  }
}

/** The chip strings shown above the input box, in a fixed order. */
export function chipLabels(frame: FrameDoc | null): string[] {
  if (!frame) return [];
  const chips: string[] = [];
  if (frame.dataset) chips.push(`dataset: ${frame.dataset}`);
  if (frame.model) chips.push(`model: ${frame.model}`);
  if (frame.cardinality !== null && frame.cardinality !== undefined) {
    chips.push(`size <= ${frame.cardinality}`);
  }
  if (frame.include.length) chips.push(`include: ${[...frame.include].sort((a, b) => a - b).join(", ")}`);
  if (frame.exclude.length) chips.push(`exclude: ${[...frame.exclude].sort((a, b) => a - b).join(", ")}`);
  return chips;
}

/** Canonical prompt inserted when the planner picks a dataset from the list. */
export function canonicalPrompt(datasetId: string, model = "mnl"): string {
  return `What is the optimal assortment for the ${datasetId} dataset using the ${model} model?`;
}
