// Boot: read the API base URL (?api=... wins, default localhost:8080),
// create a session, populate the dataset picker, and wire the view.

import { ApiClient } from "./api.js";
import { ChatController } from "./state.js";
import { ViewHandles, populateDatasetPicker, wire } from "./view.js";

function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return (fromQuery ?? "http://localhost:8080").replace(/\/+$/, "");
}

export async function boot(root: Document = document): Promise<ChatController> {
  const handles: ViewHandles = {
    transcript: root.getElementById("transcript")!,
    chips: root.getElementById("chips")!,
    input: root.getElementById("input") as HTMLTextAreaElement,
    send: root.getElementById("send") as HTMLButtonElement,
    newSession: root.getElementById("new-session") as HTMLButtonElement,
    datasets: root.getElementById("datasets") as HTMLSelectElement,
    banner: root.getElementById("banner")!,
  };
  const api = new ApiClient(apiBaseUrl());
  const controller = new ChatController(api);
  wire(handles, controller);
  await controller.newSession();
  try {
    populateDatasetPicker(handles.datasets, await api.datasets());
  } catch {
    // picker stays empty; the banner already reports unreachable services
  }
  return controller;
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  void boot();
}
